#pragma once

#include "lane3d/anchors.hpp"
#include "lane3d/assignment.hpp"
#include "lane3d/camera.hpp"
#include "lane3d/error.hpp"
#include "lane3d/eval.hpp"
#include "lane3d/image.hpp"
#include "lane3d/intrinsics_fit.hpp"
#include "lane3d/io.hpp"
#include "lane3d/lane.hpp"
#include "lane3d/parallel.hpp"
#include "lane3d/random.hpp"
#include "lane3d/raster_io.hpp"
#include "lane3d/synthetic.hpp"
#include "lane3d/training.hpp"
#include "lane3d/view_synthesis.hpp"
