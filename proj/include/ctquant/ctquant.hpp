#pragma once

#include "ctquant/chunk_store.hpp"
#include "ctquant/convex_hull.hpp"
#include "ctquant/error.hpp"
#include "ctquant/histograms.hpp"
#include "ctquant/io_util.hpp"
#include "ctquant/marching_cubes.hpp"
#include "ctquant/parallel.hpp"
#include "ctquant/parameters.hpp"
#include "ctquant/peaks.hpp"
#include "ctquant/phantom.hpp"
#include "ctquant/pipeline.hpp"
#include "ctquant/png.hpp"
#include "ctquant/project.hpp"
#include "ctquant/quantify.hpp"
#include "ctquant/region_props.hpp"
#include "ctquant/regions.hpp"
#include "ctquant/segmentation.hpp"
#include "ctquant/service.hpp"
#include "ctquant/tables.hpp"
#include "ctquant/tiff_io.hpp"
#include "ctquant/volume.hpp"
