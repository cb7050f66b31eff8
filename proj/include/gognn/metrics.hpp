#pragma once

#include <cstddef>
#include <vector>

namespace gognn {

/// Scored items with binary relevance labels, as produced by evaluation.
struct RankedPredictions {
  std::vector<double> scores;
  std::vector<int> labels;  // 0 or 1
};

/// Area under the ROC curve in the Mann-Whitney formulation: the probability
/// that a uniformly chosen positive outscores a uniformly chosen negative,
/// with score ties counted 1/2. Requires at least one positive and one
/// negative; labels must be 0/1.
double auc(const RankedPredictions& rp);

/// Step-wise (non-interpolated) average precision: positions are ranked by
/// descending score with ties broken toward the lower input index, and the
/// precisions at each positive's rank are averaged. Requires at least one
/// positive.
double ap(const RankedPredictions& rp);

}  // namespace gognn
