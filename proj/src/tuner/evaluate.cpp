// Copyright 2026 The ftune Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <map>
#include <stdexcept>

#include "ftune/parallel.hpp"
#include "ftune/tuner/tuner.hpp"

namespace ftune::tuner {

DomainEval domain_iou(const Eigen::MatrixXi& confusion) {
  if (confusion.rows() != confusion.cols() || confusion.rows() == 0) {
    throw std::invalid_argument("domain_iou: confusion matrix must be square and non-empty");
  }
  DomainEval out;
  out.patches = static_cast<std::size_t>(confusion.sum());
  if (out.patches == 0) throw std::invalid_argument("domain_iou: empty domain");
  double sum = 0.0;
  int present = 0;
  for (Eigen::Index c = 0; c < confusion.rows(); ++c) {
    const double tp = confusion(c, c);
    const double fn = confusion.row(c).sum() - tp;
    const double fp = confusion.col(c).sum() - tp;
    const double denom = tp + fp + fn;
    if (denom == 0.0) {
      out.class_iou.push_back(std::nullopt);
      continue;
    }
    out.class_iou.push_back(tp / denom);
    sum += tp / denom;
    ++present;
  }
  out.miou = sum / present;
  return out;
}

Eigen::MatrixXi confusion_matrix(const nn::SegmentationTransformer& model,
                                 const nn::ParamStore& store,
                                 std::span<const data::Sample> samples, int num_classes) {
  Eigen::MatrixXi conf = Eigen::MatrixXi::Zero(num_classes, num_classes);
  ordered_parallel_for(
      samples.size(), [&](std::size_t i) { return model.logits(store, samples[i].image); },
      [&](std::size_t i, Matrix logits) {
        for (Eigen::Index p = 0; p < logits.rows(); ++p) {
          Eigen::Index pred = 0;
          logits.row(p).maxCoeff(&pred);
          const int truth = samples[i].labels[static_cast<std::size_t>(p)];
          if (truth < 0 || truth >= num_classes) throw FormatError("label out of range");
          ++conf(truth, pred);
        }
      });
  return conf;
}

EvalReport evaluate(const nn::SegmentationTransformer& model, const nn::ParamStore& store,
                    const data::Dataset& dataset, std::span<const int> domain_ids,
                    std::span<const int> unseen_ids) {
  if (domain_ids.empty()) throw std::invalid_argument("evaluate: no domains");
  EvalReport report;
  double unseen_sum = 0.0;
  int unseen_count = 0;
  for (int id : domain_ids) {
    const auto& samples = dataset.domain(id);
    if (samples.empty()) throw std::invalid_argument("evaluate: domain " + std::to_string(id) + " is empty");
    DomainEval d = domain_iou(confusion_matrix(model, store, samples, model.config().num_classes));
    d.domain_id = id;
    if (std::find(unseen_ids.begin(), unseen_ids.end(), id) != unseen_ids.end()) {
      d.role = "unseen";
      unseen_sum += d.miou;
      ++unseen_count;
    } else if (id == kSourceDomain) {
      d.role = "source";
      report.source_miou = d.miou;
    } else {
      d.role = "mixture";
    }
    report.domains.push_back(std::move(d));
  }
  report.mean_unseen_miou = unseen_count > 0 ? unseen_sum / unseen_count : 0.0;
  return report;
}

SensitivityProfile sensitivity_profile(const nn::ParamStore& store, const nn::Selection& selection,
                                       const EstimationResult& estimate,
                                       const ScheduleConfig& cfg) {
  const Vector& drf = estimate.drfim.scores;
  const Vector& task = estimate.task.scores;
  const double final_fraction = schedule_fraction(cfg.finetune_steps, cfg).fraction;
  RankedMask drf_mask(store, selection, drf, cfg.granularity);
  RankedMask task_mask(store, selection, task, cfg.granularity);
  drf_mask.set_fraction(final_fraction);
  task_mask.set_fraction(final_fraction);
  const nn::ParamMask chosen = drf_mask.selection_mask();

  SensitivityProfile out;
  std::map<std::pair<int, int>, std::size_t> group_row;
  const auto entries = selection.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const nn::ParamEntry& e = store[entries[k]];
    const auto off = static_cast<Eigen::Index>(selection.offset(k));
    const auto len = e.value.size();
    ProfileRow row{e.name, e.group, e.layer, static_cast<std::size_t>(len)};
    row.mean_drfim = drf.segment(off, len).mean();
    row.mean_task = task.segment(off, len).mean();
    std::size_t picked = 0;
    for (Eigen::Index j = 0; j < len; ++j) picked += chosen[static_cast<std::size_t>(off + j)] ? 1 : 0;
    row.selected_fraction = static_cast<double>(picked) / static_cast<double>(len);
    out.tensors.push_back(row);

    const auto key = std::make_pair(static_cast<int>(e.group), e.layer);
    auto it = group_row.find(key);
    if (it == group_row.end()) {
      ProfileRow g = row;
      g.tensor = std::string(nn::group_name(e.group)) + "." + std::to_string(e.layer);
      g.mean_drfim *= static_cast<double>(len);
      g.mean_task *= static_cast<double>(len);
      g.selected_fraction = static_cast<double>(picked);
      group_row.emplace(key, out.groups.size());
      out.groups.push_back(g);
    } else {
      ProfileRow& g = out.groups[it->second];
      g.count += static_cast<std::size_t>(len);
      g.mean_drfim += row.mean_drfim * static_cast<double>(len);
      g.mean_task += row.mean_task * static_cast<double>(len);
      g.selected_fraction += static_cast<double>(picked);
    }
  }
  for (ProfileRow& g : out.groups) {
    const auto n = static_cast<double>(g.count);
    g.mean_drfim /= n;
    g.mean_task /= n;
    g.selected_fraction /= n;
  }
  out.spearman_drfim_task = drf.size() >= 2 ? fisher::spearman(drf, task) : 1.0;
  out.jaccard_drfim_task = jaccard(drf_mask.selection_mask(), task_mask.selection_mask());
  return out;
}

}  // namespace ftune::tuner
