#pragma once

#include "sppca/error.hpp"
#include "sppca/types.hpp"
#include "sppca/mahalanobis.hpp"
#include "sppca/weights.hpp"
#include "sppca/robust_scale.hpp"
#include "sppca/parallel.hpp"
#include "sppca/estimator.hpp"
#include "sppca/pca.hpp"
#include "sppca/spline.hpp"
#include "sppca/tuning.hpp"
#include "sppca/metrics.hpp"
#include "sppca/influence.hpp"
#include "sppca/simgen.hpp"
#include "sppca/io.hpp"
