#pragma once

// JSON problem documents. Two objective kinds are understood:
//
//   {"m": 2, "n": 2,
//    "blocks": [{"a": [1, 0], "b": [1, 0], "c": [2]}, ...],
//    "objective": {"kind": "quadratic",
//                  "q_matrix": [...], "q_vector": [...],
//                  "r_matrix": [...], "r_vector": [...]}}
//
//   {"objective": {"kind": "l1_tv", "image_size": 64, "angles": 20,
//                  "detectors": 92, "tv_weight": 3.0,
//                  "noise_fraction": 0.25, "seed": 0}}
//
// Matrices are flat row-major arrays. Blocks are implied for l1_tv.

#include "madmm/experiments.hpp"

#include "json.hpp"

#include <string>

namespace madmm {

struct ProblemDocument {
  std::string name;
  /// Either a quadratic problem or a CT spec (exactly one is meaningful).
  std::optional<MulticonstraintProblem> quadratic;
  std::optional<CtSpec> ct;
};

ProblemDocument problem_from_json(const nlohmann::json& doc);
ProblemDocument load_problem(const std::string& path);

/// Dense quadratic problems only.
nlohmann::json problem_to_json(const MulticonstraintProblem& problem);
nlohmann::json ct_spec_to_json(const CtSpec& spec);

}  // namespace madmm
