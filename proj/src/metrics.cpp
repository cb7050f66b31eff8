#include "gognn/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "gognn/tensor.hpp"

namespace gognn {
namespace {

struct LabelCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

LabelCounts validate_predictions(const RankedPredictions& rp) {
  if (rp.scores.size() != rp.labels.size()) {
    throw DimensionError("ranked predictions: scores and labels differ in length");
  }
  if (rp.scores.empty()) {
    throw ContractViolation("ranked predictions: empty input");
  }
  LabelCounts counts;
  for (int label : rp.labels) {
    if (label == 1) {
      ++counts.positives;
    } else if (label == 0) {
      ++counts.negatives;
    } else {
      throw ContractViolation("ranked predictions: labels must be 0 or 1");
    }
  }
  return counts;
}

}  // namespace

double auc(const RankedPredictions& rp) {
  const LabelCounts counts = validate_predictions(rp);
  if (counts.positives == 0 || counts.negatives == 0) {
    throw ContractViolation("auc: needs at least one positive and one negative label");
  }

  const std::size_t n = rp.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rp.scores[a] < rp.scores[b];
  });

  // Average 1-based ranks over tie runs, accumulating the positives' rank sum.
  double positive_rank_sum = 0.0;
  std::size_t run_begin = 0;
  while (run_begin < n) {
    std::size_t run_end = run_begin + 1;
    while (run_end < n && rp.scores[order[run_end]] == rp.scores[order[run_begin]]) {
      ++run_end;
    }
    const double mean_rank =
        0.5 * (static_cast<double>(run_begin + 1) + static_cast<double>(run_end));
    for (std::size_t p = run_begin; p < run_end; ++p) {
      if (rp.labels[order[p]] == 1) {
        positive_rank_sum += mean_rank;
      }
    }
    run_begin = run_end;
  }

  const double pos = static_cast<double>(counts.positives);
  const double neg = static_cast<double>(counts.negatives);
  return (positive_rank_sum - pos * (pos + 1.0) * 0.5) / (pos * neg);
}

double ap(const RankedPredictions& rp) {
  const LabelCounts counts = validate_predictions(rp);
  if (counts.positives == 0) {
    throw ContractViolation("ap: needs at least one positive label");
  }

  const std::size_t n = rp.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rp.scores[a] != rp.scores[b]) return rp.scores[a] > rp.scores[b];
    return a < b;
  });

  double precision_sum = 0.0;
  std::size_t positives_seen = 0;
  for (std::size_t rank = 0; rank < n; ++rank) {
    if (rp.labels[order[rank]] == 1) {
      ++positives_seen;
      precision_sum +=
          static_cast<double>(positives_seen) / static_cast<double>(rank + 1);
    }
  }
  return precision_sum / static_cast<double>(counts.positives);
}

}  // namespace gognn
