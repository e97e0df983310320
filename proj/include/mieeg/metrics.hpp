// Classification metrics: accuracy, chance-corrected agreement, macro F1 and
// rank-based one-vs-rest macro AUC.
#pragma once

#include <string>
#include <vector>

namespace mieeg {

struct Metrics {
  double accuracy = 0;
  double kappa = 0;
  double macro_f1 = 0;
  double macro_auc = 0;
  std::vector<std::vector<int>> confusion;  // [actual][predicted]
};

// scores: row-major [n x K] class probabilities (used only for the AUC).
Metrics compute_metrics(const std::vector<int>& labels, const std::vector<int>& predictions,
                        const std::vector<double>& scores, int n_classes);

// Mann-Whitney formulation with midranks for ties; positives are the samples
// of the given class, ranked by their class-k score.
double one_vs_rest_auc(const std::vector<int>& labels, const std::vector<double>& scores,
                       int n_samples, int n_classes, int klass);

std::string metrics_to_json(const Metrics& m);

}  // namespace mieeg
