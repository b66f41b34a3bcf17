#ifndef MFGSBS_MFGSBS_HPP
#define MFGSBS_MFGSBS_HPP

#include "mfgsbs/error.hpp"
#include "mfgsbs/graph.hpp"
#include "mfgsbs/special.hpp"
#include "mfgsbs/dataset.hpp"
#include "mfgsbs/parallel.hpp"
#include "mfgsbs/indep.hpp"
#include "mfgsbs/score.hpp"
#include "mfgsbs/search.hpp"
#include "mfgsbs/fusion.hpp"
#include "mfgsbs/synth.hpp"
#include "mfgsbs/metrics.hpp"

#endif  // MFGSBS_MFGSBS_HPP
