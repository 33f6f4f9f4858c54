#pragma once

#include "amd/types.hpp"

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace amd {

double accuracy(const std::vector<bool>& preds, const std::vector<bool>& gts);

// Non-interpolated AP: mean precision at positive ranks after a stable
// descending sort (ties keep original order). At least one positive required.
double average_precision(const std::vector<double>& scores,
                         const std::vector<bool>& labels);

struct MacroMap {
  std::optional<double> value;          // absent if no class had positives
  std::array<bool, 3> included{};       // which of FS/FA/TF entered the mean
  std::array<std::optional<double>, 3> per_class;
  std::vector<std::string> warnings;    // one entry per skipped class
};

MacroMap macro_map(const std::array<std::vector<double>, 3>& scores,
                   const std::array<std::vector<bool>, 3>& labels);

double iou(const BBox& a, const BBox& b);

// Null conventions per sample: both present → IoU, both absent → 1,
// mismatch → 0.
double miou(const std::vector<std::optional<BBox>>& preds,
            const std::vector<std::optional<BBox>>& gts);

// Micro precision over predicted token-position sets; zero predictions
// overall → 0.
double token_precision(const std::vector<std::set<int>>& preds,
                       const std::vector<std::set<int>>& gts);

// One evaluated sample, as consumed by the cross-domain report.
struct SampleEval {
  bool y_bin_gt = false, y_bin_pred = false;
  std::array<bool, 3> y_mul_gt{}, y_mul_pred{};
  std::optional<BBox> box_gt, box_pred;
  std::array<double, 3> type_scores{};  // per-type confidence in [0,1]
  bool has_scores = false;
};

struct DomainReport {
  std::string domain;
  bool intra = false;
  int n = 0;
  double acc = 0;
  std::optional<double> map;
  std::array<std::optional<double>, 3> ap;  // FS, FA, TF
  double miou = 0;
};

struct EvalReport {
  std::string train_domain;
  std::string map_source;  // "option_probs" or "hard_labels"
  std::vector<DomainReport> domains;
  DomainReport avg;  // arithmetic mean over domain rows
  std::vector<std::string> warnings;
};

// Aggregates per-domain outcomes into the table/JSON report shape. Keys of
// `evals` define the row order; train_domain marks the intra-domain row.
EvalReport cross_domain_report(
    const std::vector<std::pair<std::string, std::vector<SampleEval>>>& evals,
    const std::string& train_domain);

std::string render_report_table(const EvalReport& report);  // values ×100
std::string report_to_json(const EvalReport& report);       // values in [0,1]

}  // namespace amd
