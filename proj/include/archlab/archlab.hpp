#pragma once

#include "datasets.hpp"
#include "deep_aa.hpp"
#include "linear_aa.hpp"
#include "matching.hpp"
#include "model_selection.hpp"
#include "numerics.hpp"
#include "pca.hpp"
#include "prob_aa.hpp"
#include "random.hpp"
#include "recovery.hpp"
#include "serialization.hpp"
#include "simplex.hpp"
