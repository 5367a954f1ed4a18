// Copyright 2026 The MORPH Drift Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "morph/metrics.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "morph/errors.hpp"

namespace morph::eval {
namespace {

double ratio(long num, long den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

constexpr const char* kMetricsHeader =
    "month,tp,fp,tn,fn,f1,fpr,fnr,annotations_used,pseudo_malware,pseudo_benign";

template <typename T>
T parse_field(const std::string& s, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(line, "invalid metrics field '" + s + "'");
  }
  return value;
}

}  // namespace

double MetricsRecord::accuracy() const { return ratio(tp + tn, total()); }

void derive_rates(MetricsRecord& r) {
  r.f1 = ratio(2 * r.tp, 2 * r.tp + r.fp + r.fn);
  r.fpr = ratio(r.fp, r.fp + r.tn);
  r.fnr = ratio(r.fn, r.fn + r.tp);
}

MetricsRecord compute_metrics(std::span<const int> predictions, std::span<const int> truths,
                              int month) {
  if (predictions.size() != truths.size()) {
    throw InputError("predictions and truths differ in length");
  }
  MetricsRecord r;
  r.month = month;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i];
    const int t = truths[i];
    if ((p != 0 && p != 1) || (t != 0 && t != 1)) throw InputError("labels must be 0 or 1");
    if (p == 1) {
      (t == 1 ? r.tp : r.fp) += 1;
    } else {
      (t == 1 ? r.fn : r.tn) += 1;
    }
  }
  derive_rates(r);
  return r;
}

ConfidenceExport export_confidence(const nn::Matrix& probs, std::span<const data::Sample> samples) {
  if (probs.rows() != static_cast<Eigen::Index>(samples.size()) || probs.cols() != 2) {
    throw ShapeError("probability rows do not match samples");
  }
  ConfidenceExport rows;
  rows.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.label) throw InputError("confidence export needs ground truth");
    const auto r = static_cast<Eigen::Index>(i);
    const int pred = probs(r, 1) > probs(r, 0) ? 1 : 0;
    rows.push_back({s.month, probs.row(r).maxCoeff(), pred == *s.label, *s.label, pred});
  }
  return rows;
}

ConfidenceExport export_confidence(const nn::Mlp& model, std::span<const data::Sample> samples) {
  return export_confidence(nn::predict_proba(model, data::feature_matrix(samples)), samples);
}

Summary summarize(std::span<const MetricsRecord> history) {
  if (history.empty()) throw InputError("cannot summarize an empty history");
  Summary s;
  s.months = history.size();
  for (const auto& r : history) {
    s.mean_f1 += r.f1;
    s.mean_fpr += r.fpr;
    s.mean_fnr += r.fnr;
    s.mean_accuracy += r.accuracy();
  }
  const auto n = static_cast<double>(history.size());
  s.mean_f1 /= n;
  s.mean_fpr /= n;
  s.mean_fnr /= n;
  s.mean_accuracy /= n;
  return s;
}

Summary summarize(std::span<const MetricsRecord> history, std::span<const MetricsRecord> reference) {
  if (history.size() != reference.size()) {
    throw InputError("reference run covers " + std::to_string(reference.size()) +
                     " months, this run " + std::to_string(history.size()));
  }
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].month != reference[i].month) {
      throw InputError("month mismatch at position " + std::to_string(i) + ": " +
                       std::to_string(history[i].month) + " vs " +
                       std::to_string(reference[i].month));
    }
  }
  Summary s = summarize(history);
  const Summary ref = summarize(reference);
  s.delta_f1 = s.mean_f1 - ref.mean_f1;
  s.delta_fpr = s.mean_fpr - ref.mean_fpr;
  s.delta_fnr = s.mean_fnr - ref.mean_fnr;
  return s;
}

std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> history) {
  out << kMetricsHeader << '\n';
  for (const auto& r : history) {
    out << r.month << ',' << r.tp << ',' << r.fp << ',' << r.tn << ',' << r.fn << ','
        << format_real(r.f1) << ',' << format_real(r.fpr) << ',' << format_real(r.fnr) << ','
        << r.annotations_used << ',' << r.pseudo_malware << ',' << r.pseudo_benign << '\n';
  }
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ParseError(1, "unexpected metrics header");
  }
  std::vector<MetricsRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw ParseError(line_no, "expected 11 metrics fields");
    MetricsRecord r;
    r.month = parse_field<int>(f[0], line_no);
    r.tp = parse_field<long>(f[1], line_no);
    r.fp = parse_field<long>(f[2], line_no);
    r.tn = parse_field<long>(f[3], line_no);
    r.fn = parse_field<long>(f[4], line_no);
    r.f1 = parse_field<double>(f[5], line_no);
    r.fpr = parse_field<double>(f[6], line_no);
    r.fnr = parse_field<double>(f[7], line_no);
    r.annotations_used = parse_field<int>(f[8], line_no);
    r.pseudo_malware = parse_field<int>(f[9], line_no);
    r.pseudo_benign = parse_field<int>(f[10], line_no);
    out.push_back(r);
  }
  return out;
}

void write_confidence_csv(std::ostream& out, std::span<const ConfidenceRow> rows) {
  out << "month,max_prob,correct,true_label,pred_label\n";
  for (const auto& r : rows) {
    out << r.month << ',' << format_real(r.max_prob) << ',' << (r.correct ? 1 : 0) << ','
        << r.true_label << ',' << r.pred_label << '\n';
  }
}

}  // namespace morph::eval
