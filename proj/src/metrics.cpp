#include "amd/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace amd {

double accuracy(const std::vector<bool>& preds, const std::vector<bool>& gts) {
  if (preds.empty() || preds.size() != gts.size())
    throw ContractError("accuracy: inputs must be equal-length and non-empty");
  size_t hits = 0;
  for (size_t i = 0; i < preds.size(); ++i) hits += preds[i] == gts[i];
  return static_cast<double>(hits) / preds.size();
}

double average_precision(const std::vector<double>& scores,
                         const std::vector<bool>& labels) {
  if (scores.empty() || scores.size() != labels.size())
    throw ContractError("average_precision: inputs must be equal-length, non-empty");
  size_t positives = std::count(labels.begin(), labels.end(), true);
  if (positives == 0)
    throw ContractError("average_precision: no positive labels");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  double sum = 0;
  size_t seen_pos = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (!labels[order[rank]]) continue;
    ++seen_pos;
    sum += static_cast<double>(seen_pos) / (rank + 1);
  }
  return sum / positives;
}

MacroMap macro_map(const std::array<std::vector<double>, 3>& scores,
                   const std::array<std::vector<bool>, 3>& labels) {
  static const char* kTypeNames[3] = {"FS", "FA", "TF"};
  MacroMap out;
  double sum = 0;
  int used = 0;
  for (int c = 0; c < 3; ++c) {
    bool any_pos =
        std::count(labels[c].begin(), labels[c].end(), true) > 0;
    if (!any_pos) {
      out.warnings.push_back(std::string("macro_map: class ") + kTypeNames[c] +
                             " has no positives, skipped");
      continue;
    }
    double ap = average_precision(scores[c], labels[c]);
    out.per_class[c] = ap;
    out.included[c] = true;
    sum += ap;
    ++used;
  }
  if (used > 0) out.value = sum / used;
  return out;
}

double iou(const BBox& a, const BBox& b) {
  double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  double inter = std::max(0.0, iw) * std::max(0.0, ih);
  double uni = bbox_area(a) + bbox_area(b) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double miou(const std::vector<std::optional<BBox>>& preds,
            const std::vector<std::optional<BBox>>& gts) {
  if (preds.size() != gts.size())
    throw ContractError("miou: inputs must be equal-length");
  if (preds.empty()) throw ContractError("miou: empty input");
  double sum = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] && gts[i])
      sum += iou(*preds[i], *gts[i]);
    else if (!preds[i] && !gts[i])
      sum += 1.0;
    // one-sided: contributes 0
  }
  return sum / preds.size();
}

double token_precision(const std::vector<std::set<int>>& preds,
                       const std::vector<std::set<int>>& gts) {
  if (preds.size() != gts.size())
    throw ContractError("token_precision: inputs must be equal-length");
  size_t hit = 0, predicted = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    predicted += preds[i].size();
    for (int p : preds[i]) hit += gts[i].count(p);
  }
  if (predicted == 0) return 0.0;
  return static_cast<double>(hit) / predicted;
}

namespace {

DomainReport evaluate_domain(const std::string& domain,
                             const std::vector<SampleEval>& evals,
                             bool intra, bool* used_scores,
                             std::vector<std::string>* warnings) {
  DomainReport r;
  r.domain = domain;
  r.intra = intra;
  r.n = static_cast<int>(evals.size());

  std::vector<bool> bin_pred, bin_gt;
  std::array<std::vector<double>, 3> scores;
  std::array<std::vector<bool>, 3> labels;
  std::vector<std::optional<BBox>> box_pred, box_gt;
  for (const auto& e : evals) {
    bin_pred.push_back(e.y_bin_pred);
    bin_gt.push_back(e.y_bin_gt);
    for (int c = 0; c < 3; ++c) {
      labels[c].push_back(e.y_mul_gt[c]);
      if (e.has_scores) {
        scores[c].push_back(e.type_scores[c]);
      } else {
        scores[c].push_back(e.y_mul_pred[c] ? 1.0 : 0.0);
        *used_scores = false;
      }
    }
    box_pred.push_back(e.box_pred);
    box_gt.push_back(e.box_gt);
  }

  r.acc = accuracy(bin_pred, bin_gt);
  MacroMap mm = macro_map(scores, labels);
  r.map = mm.value;
  r.ap = mm.per_class;
  for (auto& w : mm.warnings) warnings->push_back(domain + ": " + w);
  r.miou = miou(box_pred, box_gt);
  return r;
}

std::string fmt_pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v * 100.0);
  return buf;
}

}  // namespace

EvalReport cross_domain_report(
    const std::vector<std::pair<std::string, std::vector<SampleEval>>>& evals,
    const std::string& train_domain) {
  if (evals.empty()) throw ContractError("cross_domain_report: no domains");
  EvalReport report;
  report.train_domain = train_domain;

  bool used_scores = true;
  for (const auto& [domain, samples] : evals) {
    if (samples.empty())
      throw ContractError("cross_domain_report: empty domain '" + domain + "'");
    report.domains.push_back(evaluate_domain(domain, samples, domain == train_domain,
                                             &used_scores, &report.warnings));
  }
  report.map_source = used_scores ? "option_probs" : "hard_labels";

  DomainReport& avg = report.avg;
  avg.domain = "AVG";
  double acc = 0, mi = 0, map_sum = 0;
  int n = 0, map_n = 0;
  for (const auto& d : report.domains) {
    acc += d.acc;
    mi += d.miou;
    n += d.n;
    if (d.map) {
      map_sum += *d.map;
      ++map_n;
    }
  }
  avg.n = n;
  avg.acc = acc / report.domains.size();
  avg.miou = mi / report.domains.size();
  if (map_n == static_cast<int>(report.domains.size()))
    avg.map = map_sum / map_n;
  else if (map_n > 0)
    report.warnings.push_back(
        "AVG mAP omitted: some domains had no scorable classes");
  return report;
}

std::string render_report_table(const EvalReport& report) {
  std::ostringstream out;
  out << "Domain      ACC     mAP     mIoU    n\n";
  out << "---------------------------------------\n";
  auto row = [&](const DomainReport& d) {
    std::string name = d.domain + (d.intra ? " *" : "");
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-10s  %-6s  %-6s  %-6s  %d\n", name.c_str(),
                  fmt_pct(d.acc).c_str(), fmt_pct(d.map).c_str(),
                  fmt_pct(d.miou).c_str(), d.n);
    out << buf;
  };
  for (const auto& d : report.domains) row(d);
  out << "---------------------------------------\n";
  row(report.avg);
  out << "* intra-domain (trained on " << report.train_domain << "); mAP from "
      << report.map_source << "\n";
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  return out.str();
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["train_domain"] = report.train_domain;
  j["map_source"] = report.map_source;
  auto dump_row = [](const DomainReport& d) {
    nlohmann::ordered_json r;
    r["domain"] = d.domain;
    r["intra"] = d.intra;
    r["n"] = d.n;
    r["acc"] = d.acc;
    if (d.map) r["map"] = *d.map; else r["map"] = nullptr;
    r["miou"] = d.miou;
    nlohmann::ordered_json ap;
    const char* names[3] = {"FS", "FA", "TF"};
    for (int c = 0; c < 3; ++c) {
      if (d.ap[c]) ap[names[c]] = *d.ap[c]; else ap[names[c]] = nullptr;
    }
    r["ap"] = ap;
    return r;
  };
  j["domains"] = nlohmann::ordered_json::array();
  for (const auto& d : report.domains) j["domains"].push_back(dump_row(d));
  j["avg"] = dump_row(report.avg);
  j["warnings"] = report.warnings;
  return j.dump(2);
}

}  // namespace amd
