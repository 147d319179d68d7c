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

#include "ftune/io/reports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "ftune/io/checkpoint.hpp"

namespace ftune::io {

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return m;
}

int method_rank(const std::string& name) {
  for (int m = 0; m <= static_cast<int>(tuner::Method::TaskFIMMask); ++m) {
    if (tuner::to_string(static_cast<tuner::Method>(m)) == name) return m;
  }
  return 1000;
}

}  // namespace

nlohmann::json to_json(const tuner::EvalReport& r) {
  nlohmann::json j;
  j["schema"] = kEvalReportSchema;
  j["method"] = r.method;
  j["seed"] = r.seed;
  j["mean_unseen_miou"] = r.mean_unseen_miou;
  j["source_miou"] = r.source_miou;
  j["checkpoint_sha256"] = r.checkpoint_digest;
  j["config"] = r.config_echo;
  // Named random streams, each derived from the seed.
  j["streams"] = {"pretrain", "head", "warmup", "estimate", "finetune"};
  if (r.method == "random") j["streams"].push_back("random-mask");
  j["domains"] = nlohmann::json::array();
  for (const auto& d : r.domains) {
    nlohmann::json e;
    e["domain_id"] = d.domain_id;
    e["role"] = d.role;
    e["patches"] = d.patches;
    e["miou"] = d.miou;
    e["class_iou"] = nlohmann::json::array();
    for (const auto& c : d.class_iou) {
      e["class_iou"].push_back(c ? nlohmann::json(*c) : nlohmann::json(nullptr));
    }
    j["domains"].push_back(std::move(e));
  }
  return j;
}

tuner::EvalReport eval_report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kEvalReportSchema) {
      throw FormatError("unexpected report schema '" + j.at("schema").get<std::string>() + "'");
    }
    tuner::EvalReport r;
    r.method = j.at("method").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mean_unseen_miou = j.at("mean_unseen_miou").get<double>();
    r.source_miou = j.at("source_miou").get<double>();
    r.checkpoint_digest = j.at("checkpoint_sha256").get<std::string>();
    r.config_echo = j.at("config").get<std::string>();
    for (const auto& e : j.at("domains")) {
      tuner::DomainEval d;
      d.domain_id = e.at("domain_id").get<int>();
      d.role = e.at("role").get<std::string>();
      d.patches = e.at("patches").get<std::size_t>();
      d.miou = e.at("miou").get<double>();
      for (const auto& c : e.at("class_iou")) {
        d.class_iou.push_back(c.is_null() ? std::nullopt : std::optional<double>(c.get<double>()));
      }
      r.domains.push_back(std::move(d));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("eval report: ") + e.what());
  }
}

tuner::EvalReport load_eval_report(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return eval_report_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string eval_report_csv(const tuner::EvalReport& r) {
  std::ostringstream out;
  std::size_t classes = 0;
  for (const auto& d : r.domains) classes = std::max(classes, d.class_iou.size());
  out << "method,seed,domain_id,role,patches,miou";
  for (std::size_t c = 0; c < classes; ++c) out << ",iou_" << c;
  out << "\n";
  for (const auto& d : r.domains) {
    out << r.method << "," << r.seed << "," << d.domain_id << "," << d.role << "," << d.patches
        << "," << num(d.miou);
    for (std::size_t c = 0; c < classes; ++c) {
      out << ",";
      if (c < d.class_iou.size() && d.class_iou[c]) out << num(*d.class_iou[c]);
    }
    out << "\n";
  }
  return out.str();
}

std::string scores_csv(const nn::ParamStore& store, const nn::Selection& selection,
                       const Vector& drfim, const Vector& task) {
  const auto n = static_cast<Eigen::Index>(selection.total_scalars());
  if (drfim.size() != n || task.size() != n) {
    throw std::invalid_argument("scores_csv: scores not aligned with the selection");
  }
  std::ostringstream out;
  out << "parameter,group,layer,drfim,taskfim\n";
  const auto entries = selection.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const nn::ParamEntry& e = store[entries[k]];
    for (Eigen::Index j = 0; j < e.value.size(); ++j) {
      const auto i = static_cast<Eigen::Index>(selection.offset(k)) + j;
      out << e.name << "[" << j << "]," << nn::group_name(e.group) << "," << e.layer << ","
          << num(drfim(i)) << "," << num(task(i)) << "\n";
    }
  }
  return out.str();
}

std::string profile_csv(const tuner::SensitivityProfile& p) {
  std::ostringstream out;
  out << "level,name,group,layer,count,mean_drfim,mean_taskfim,selected_fraction\n";
  auto rows = [&](const char* level, const std::vector<tuner::ProfileRow>& v) {
    for (const auto& r : v) {
      out << level << "," << r.tensor << "," << nn::group_name(r.group) << "," << r.layer << ","
          << r.count << "," << num(r.mean_drfim) << "," << num(r.mean_task) << ","
          << num(r.selected_fraction) << "\n";
    }
  };
  rows("tensor", p.tensors);
  rows("group", p.groups);
  return out.str();
}

std::vector<MethodSummary> summarize(std::span<const tuner::EvalReport> reports) {
  std::map<std::string, std::vector<const tuner::EvalReport*>> by_method;
  for (const auto& r : reports) by_method[r.method].push_back(&r);
  std::vector<MethodSummary> rows;
  for (const auto& [method, list] : by_method) {
    MethodSummary s;
    s.method = method;
    s.n = list.size();
    std::vector<double> unseen, source;
    std::map<int, std::vector<double>> per_domain;
    for (const auto* r : list) {
      unseen.push_back(r->mean_unseen_miou);
      source.push_back(r->source_miou);
      for (const auto& d : r->domains) per_domain[d.domain_id].push_back(d.miou);
    }
    const Moments mu = moments(unseen);
    const Moments ms = moments(source);
    s.mean_unseen = mu.mean;
    s.std_unseen = mu.std;
    s.mean_source = ms.mean;
    s.std_source = ms.std;
    for (const auto& [id, v] : per_domain) s.domain_means.emplace_back(id, moments(v).mean);
    rows.push_back(std::move(s));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const MethodSummary& a, const MethodSummary& b) {
    return method_rank(a.method) < method_rank(b.method);
  });
  return rows;
}

std::string summary_csv(std::span<const MethodSummary> rows) {
  std::vector<int> ids;
  for (const auto& r : rows) {
    for (const auto& [id, v] : r.domain_means) {
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
  }
  std::sort(ids.begin(), ids.end());
  std::ostringstream out;
  out << "method,n,mean_unseen_miou,std_unseen_miou,mean_source_miou,std_source_miou";
  for (int id : ids) out << ",miou_domain_" << id;
  out << "\n";
  for (const auto& r : rows) {
    out << r.method << "," << r.n << "," << num(r.mean_unseen) << "," << num(r.std_unseen) << ","
        << num(r.mean_source) << "," << num(r.std_source);
    for (int id : ids) {
      out << ",";
      for (const auto& [d, v] : r.domain_means) {
        if (d == id) out << num(v);
      }
    }
    out << "\n";
  }
  return out.str();
}

nlohmann::json summary_json(std::span<const MethodSummary> rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json e;
    e["method"] = r.method;
    e["n"] = r.n;
    e["mean_unseen_miou"] = r.mean_unseen;
    e["std_unseen_miou"] = r.std_unseen;
    e["mean_source_miou"] = r.mean_source;
    e["std_source_miou"] = r.std_source;
    e["domain_miou"] = nlohmann::json::object();
    for (const auto& [id, v] : r.domain_means) e["domain_miou"][std::to_string(id)] = v;
    j.push_back(std::move(e));
  }
  return j;
}

OrderingCheck ordering_check(std::span<const tuner::EvalReport> reports) {
  std::map<std::uint64_t, std::map<std::string, double>> by_seed;
  for (const auto& r : reports) by_seed[r.seed][r.method] = r.mean_unseen_miou;
  OrderingCheck c;
  const auto pick = [](const std::map<std::string, double>& m, tuner::Method method) {
    const auto it = m.find(std::string(tuner::to_string(method)));
    if (it == m.end()) {
      throw FormatError("ordering check: missing method '" +
                        std::string(tuner::to_string(method)) + "'");
    }
    return it->second;
  };
  for (const auto& [seed, m] : by_seed) {
    const double ft = pick(m, tuner::Method::FisherTune);
    const double task = pick(m, tuner::Method::TaskFIMMask);
    c.fishertune += ft;
    c.freeze += pick(m, tuner::Method::Freeze);
    c.random += pick(m, tuner::Method::RandomMask);
    c.taskfim += task;
    const auto full = m.find(std::string(tuner::to_string(tuner::Method::Full)));
    if (full != m.end()) c.full += full->second;
    c.wins_vs_taskfim += ft >= task ? 1 : 0;
    ++c.seeds;
  }
  if (c.seeds == 0) return c;
  const auto n = static_cast<double>(c.seeds);
  c.fishertune /= n;
  c.freeze /= n;
  c.random /= n;
  c.taskfim /= n;
  c.full /= n;
  c.beats_freeze = c.fishertune >= c.freeze;
  c.beats_random = c.fishertune >= c.random;
  c.beats_taskfim_most_seeds = 5 * c.wins_vs_taskfim >= 4 * c.seeds;
  return c;
}

nlohmann::json to_json(const OrderingCheck& c) {
  return {{"seeds", c.seeds},
          {"mean_unseen_miou",
           {{"fishertune", c.fishertune},
            {"freeze", c.freeze},
            {"random", c.random},
            {"taskfim", c.taskfim},
            {"full", c.full}}},
          {"fishertune_ge_taskfim_seeds", c.wins_vs_taskfim},
          {"fishertune_ge_freeze", c.beats_freeze},
          {"fishertune_ge_random", c.beats_random},
          {"fishertune_ge_taskfim_4_of_5", c.beats_taskfim_most_seeds}};
}

}  // namespace ftune::io
