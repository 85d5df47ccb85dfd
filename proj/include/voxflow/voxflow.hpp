#pragma once

#include "voxflow/errors.hpp"
#include "voxflow/numerics/tensor.hpp"
#include "voxflow/numerics/tape.hpp"
#include "voxflow/numerics/adam.hpp"
#include "voxflow/numerics/gradcheck.hpp"
#include "voxflow/store/tensor_file.hpp"
#include "voxflow/store/manifest.hpp"
#include "voxflow/pipeline/resample.hpp"
#include "voxflow/pipeline/encoder.hpp"
#include "voxflow/cnf/positional.hpp"
#include "voxflow/cnf/flow.hpp"
#include "voxflow/cnf/checkpoint.hpp"
#include "voxflow/objective/objective.hpp"
#include "voxflow/scoring/scorer.hpp"
#include "voxflow/metrics/ranking.hpp"
#include "voxflow/metrics/regions.hpp"
#include "voxflow/metrics/evaluate.hpp"
#include "voxflow/app/cli.hpp"
#include "voxflow/app/config.hpp"
#include "voxflow/app/train.hpp"
#include "voxflow/app/score.hpp"
#include "voxflow/app/synthbench.hpp"
