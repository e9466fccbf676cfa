#pragma once

#include "sipp/error.hpp"
#include "sipp/eval.hpp"
#include "sipp/flat_scan.hpp"
#include "sipp/gallery.hpp"
#include "sipp/image.hpp"
#include "sipp/image_io.hpp"
#include "sipp/lsh_index.hpp"
#include "sipp/repro.hpp"
#include "sipp/rng.hpp"
#include "sipp/search.hpp"
#include "sipp/similarity.hpp"
#include "sipp/svd_augment.hpp"
#include "sipp/synth.hpp"
#include "sipp/version.hpp"
