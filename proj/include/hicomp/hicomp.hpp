#pragma once

#include "hicomp/error.hpp"
#include "hicomp/guided_filter.hpp"
#include "hicomp/hierarchy.hpp"
#include "hicomp/image.hpp"
#include "hicomp/losses.hpp"
#include "hicomp/png_io.hpp"
#include "hicomp/scene.hpp"
#include "hicomp/toytrain.hpp"
#include "hicomp/warp.hpp"
