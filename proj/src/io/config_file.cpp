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

#include "ftune/io/config_file.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <cctype>
#include <charconv>
#include <functional>
#include <regex>
#include <sstream>

#include "ftune/io/checkpoint.hpp"

namespace ftune::io {

namespace {

using tuner::TrainConfig;

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw FormatError("'" + s + "' is not a valid number");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw FormatError("'" + s + "' is not a boolean (true/false)");
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split(s)) out.push_back(parse_number<double>(item));
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <typename T, typename Access>
Field num(std::string key, Access access) {
  return {std::move(key),
          [access](const TrainConfig& c) {
            const T v = access(const_cast<TrainConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(v);
            } else {
              return std::to_string(v);
            }
          },
          [access](TrainConfig& c, const std::string& s) { access(c) = parse_number<T>(s); }};
}

template <typename Access>
Field flag(std::string key, Access access) {
  return {std::move(key),
          [access](const TrainConfig& c) {
            return std::string(access(const_cast<TrainConfig&>(c)) ? "true" : "false");
          },
          [access](TrainConfig& c, const std::string& s) { access(c) = parse_bool(s); }};
}

template <typename Access, typename Parse>
Field enumeration(std::string key, Access access, Parse parse) {
  return {std::move(key),
          [access](const TrainConfig& c) {
            return std::string(tuner::to_string(access(const_cast<TrainConfig&>(c))));
          },
          [access, parse](TrainConfig& c, const std::string& s) { access(c) = parse(s); }};
}

template <typename Access>
Field list(std::string key, Access access) {
  return {std::move(key),
          [access](const TrainConfig& c) { return join(access(const_cast<TrainConfig&>(c))); },
          [access](TrainConfig& c, const std::string& s) { access(c) = parse_list(s); }};
}

struct Section {
  std::string name;
  std::vector<Field> fields;
};

std::vector<Section> schema() {
  std::vector<Section> s;
  s.push_back({"model",
               {num<int>("image_size", [](TrainConfig& c) -> auto& { return c.model.image_size; }),
                num<int>("patch_size", [](TrainConfig& c) -> auto& { return c.model.patch_size; }),
                num<int>("channels", [](TrainConfig& c) -> auto& { return c.model.channels; }),
                num<int>("embed_dim", [](TrainConfig& c) -> auto& { return c.model.embed_dim; }),
                num<int>("num_heads", [](TrainConfig& c) -> auto& { return c.model.num_heads; }),
                num<int>("head_dim", [](TrainConfig& c) -> auto& { return c.model.head_dim; }),
                num<int>("num_blocks", [](TrainConfig& c) -> auto& { return c.model.num_blocks; }),
                num<int>("ffn_hidden", [](TrainConfig& c) -> auto& { return c.model.ffn_hidden; }),
                num<int>("num_classes", [](TrainConfig& c) -> auto& { return c.model.num_classes; })}});
  s.push_back(
      {"data",
       {num<std::uint64_t>("seed", [](TrainConfig& c) -> auto& { return c.data.seed; }),
        num<int>("mixture_domains", [](TrainConfig& c) -> auto& { return c.data.mixture_domains; }),
        num<int>("mixture_scenes", [](TrainConfig& c) -> auto& { return c.data.mixture_scenes; }),
        num<int>("source_scenes", [](TrainConfig& c) -> auto& { return c.data.source_scenes; }),
        num<int>("eval_scenes", [](TrainConfig& c) -> auto& { return c.data.eval_scenes; }),
        num<double>("mixture_shift", [](TrainConfig& c) -> auto& { return c.data.mixture_shift; }),
        num<double>("mixture_scale_min", [](TrainConfig& c) -> auto& { return c.data.mixture_scale_min; }),
        num<double>("mixture_scale_max", [](TrainConfig& c) -> auto& { return c.data.mixture_scale_max; }),
        num<double>("mixture_noise_max", [](TrainConfig& c) -> auto& { return c.data.mixture_noise_max; }),
        num<double>("mixture_freq_min", [](TrainConfig& c) -> auto& { return c.data.mixture_freq_min; }),
        num<double>("mixture_freq_max", [](TrainConfig& c) -> auto& { return c.data.mixture_freq_max; }),
        list("source_shift", [](TrainConfig& c) -> auto& { return c.data.source.channel_mean_shift; }),
        list("source_scale", [](TrainConfig& c) -> auto& { return c.data.source.channel_scale; }),
        num<double>("source_noise_std", [](TrainConfig& c) -> auto& { return c.data.source.noise_std; }),
        num<double>("source_texture_freq", [](TrainConfig& c) -> auto& { return c.data.source.texture_freq; })}});
  s.push_back(
      {"estimation",
       {enumeration("mode", [](TrainConfig& c) -> auto& { return c.estimation.mode; }, tuner::parse_estimation_mode),
        num<int>("draws", [](TrainConfig& c) -> auto& { return c.estimation.draws; }),
        num<int>("batch_size", [](TrainConfig& c) -> auto& { return c.estimation.batch_size; }),
        {"label_mode",
         [](const TrainConfig& c) { return std::string(fisher::label_mode_name(c.estimation.label_mode)); },
         [](TrainConfig& c, const std::string& s) { c.estimation.label_mode = fisher::parse_label_mode(s); }},
        num<double>("epsilon", [](TrainConfig& c) -> auto& { return c.estimation.epsilon; }),
        {"denominator",
         [](const TrainConfig& c) {
           return std::string(c.estimation.denominator == variational::DenominatorVariant::Literal
                                  ? "literal"
                                  : "exact_substitution");
         },
         [](TrainConfig& c, const std::string& s) {
           if (s == "literal") {
             c.estimation.denominator = variational::DenominatorVariant::Literal;
           } else if (s == "exact_substitution") {
             c.estimation.denominator = variational::DenominatorVariant::ExactSubstitution;
           } else {
             throw FormatError("unknown denominator '" + s + "'");
           }
         }},
        enumeration("uncertainty", [](TrainConfig& c) -> auto& { return c.estimation.uncertainty; },
                    tuner::parse_uncertainty_source),
        flag("zero_shift", [](TrainConfig& c) -> auto& { return c.estimation.zero_shift; }),
        num<double>("gamma", [](TrainConfig& c) -> auto& { return c.estimation.var.gamma; }),
        num<double>("tau", [](TrainConfig& c) -> auto& { return c.estimation.var.tau; }),
        num<int>("mc_samples", [](TrainConfig& c) -> auto& { return c.estimation.var.mc_samples; }),
        flag("antithetic", [](TrainConfig& c) -> auto& { return c.estimation.var.antithetic; }),
        num<int>("steps", [](TrainConfig& c) -> auto& { return c.estimation.var.steps; }),
        num<double>("learning_rate", [](TrainConfig& c) -> auto& { return c.estimation.var.learning_rate; }),
        num<double>("mean_learning_rate", [](TrainConfig& c) -> auto& { return c.estimation.var.mean_learning_rate; }),
        flag("freeze_mean", [](TrainConfig& c) -> auto& { return c.estimation.var.freeze_mean; }),
        flag("floor_at_prior", [](TrainConfig& c) -> auto& { return c.estimation.var.floor_at_prior; }),
        num<double>("max_step", [](TrainConfig& c) -> auto& { return c.estimation.var.max_step; }),
        num<double>("tail_fraction", [](TrainConfig& c) -> auto& { return c.estimation.var.tail_fraction; }),
        num<int>("divergence_window", [](TrainConfig& c) -> auto& { return c.estimation.var.divergence_window; })}});
  s.push_back(
      {"schedule",
       {enumeration("mode", [](TrainConfig& c) -> auto& { return c.schedule.mode; }, tuner::parse_schedule_mode),
        num<double>("delta_min", [](TrainConfig& c) -> auto& { return c.schedule.delta_min; }),
        num<double>("delta_max", [](TrainConfig& c) -> auto& { return c.schedule.delta_max; }),
        num<int>("warmup_steps", [](TrainConfig& c) -> auto& { return c.schedule.warmup_steps; }),
        num<int>("finetune_steps", [](TrainConfig& c) -> auto& { return c.schedule.finetune_steps; }),
        num<int>("batch_size", [](TrainConfig& c) -> auto& { return c.schedule.batch_size; }),
        num<double>("warmup_lr", [](TrainConfig& c) -> auto& { return c.schedule.warmup_lr; }),
        num<double>("finetune_lr", [](TrainConfig& c) -> auto& { return c.schedule.finetune_lr; }),
        num<double>("decoder_lr", [](TrainConfig& c) -> auto& { return c.schedule.decoder_lr; }),
        num<double>("momentum", [](TrainConfig& c) -> auto& { return c.schedule.momentum; }),
        enumeration("granularity", [](TrainConfig& c) -> auto& { return c.schedule.granularity; },
                    tuner::parse_granularity),
        {"selection_groups",
         [](const TrainConfig& c) {
           std::string out;
           for (std::size_t i = 0; i < c.schedule.selection_groups.size(); ++i) {
             out += (i ? ", " : "") + std::string(nn::group_name(c.schedule.selection_groups[i]));
           }
           return out;
         },
         [](TrainConfig& c, const std::string& s) {
           c.schedule.selection_groups.clear();
           for (const auto& g : split(s)) c.schedule.selection_groups.push_back(nn::parse_group(g));
         }},
        num<int>("pretrain_steps", [](TrainConfig& c) -> auto& { return c.schedule.pretrain_steps; }),
        num<double>("pretrain_lr", [](TrainConfig& c) -> auto& { return c.schedule.pretrain_lr; }),
        enumeration("pretrain_task", [](TrainConfig& c) -> auto& { return c.schedule.pretrain_task; },
                    tuner::parse_pretrain_task)}});
  s.push_back({"baselines",
               {{"methods",
                 [](const TrainConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.baselines.methods.size(); ++i) {
                     out += (i ? ", " : "") + std::string(tuner::to_string(c.baselines.methods[i]));
                   }
                   return out;
                 },
                 [](TrainConfig& c, const std::string& s) {
                   c.baselines.methods.clear();
                   for (const auto& m : split(s)) c.baselines.methods.push_back(tuner::parse_method(m));
                 }}}});
  s.push_back({"output",
               {{"dir", [](const TrainConfig& c) { return c.output.dir; },
                 [](TrainConfig& c, const std::string& s) { c.output.dir = s; }},
                num<std::uint64_t>("seed", [](TrainConfig& c) -> auto& { return c.output.seed; }),
                num<int>("seeds", [](TrainConfig& c) -> auto& { return c.output.seeds; })}});
  return s;
}

// Unseen domains are addressed as unseen<N>_<field>, N = 1..unseen_domains.
const std::regex kUnseenKey(R"(unseen([0-9]+)_(shift|scale|noise_std|texture_freq))");

data::DomainSpec default_unseen(int index, int channels) {
  data::DomainSpec s;
  s.domain_id = tuner::kFirstUnseenDomain + index;
  s.channel_mean_shift.assign(static_cast<std::size_t>(channels), 0.0);
  s.channel_scale.assign(static_cast<std::size_t>(channels), 1.0);
  return s;
}

}  // namespace

tuner::TrainConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  try {
    // read_ini only knows whole-line comments; drop trailing ones too.
    std::istringstream raw(text);
    std::string cleaned, line;
    while (std::getline(raw, line)) {
      for (std::size_t i = 1; i < line.size(); ++i) {
        if ((line[i] == ';' || line[i] == '#') && std::isspace(static_cast<unsigned char>(line[i - 1]))) {
          line.erase(i);
          break;
        }
      }
      cleaned += line;
      cleaned += '\n';
    }
    std::istringstream in(cleaned);
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  TrainConfig cfg;
  const auto sections = schema();
  for (const auto& [name, body] : tree) {
    if (body.empty()) throw FormatError("config: key '" + name + "' outside any section");
    const auto sec = std::find_if(sections.begin(), sections.end(),
                                  [&](const Section& s) { return s.name == name; });
    if (sec == sections.end()) throw FormatError("config: unknown section [" + name + "]");
    if (name == "data") {
      if (auto n = body.get_optional<std::string>("unseen_domains")) {
        const int count = parse_number<int>(trim(*n));
        if (count < 1) throw FormatError("config: data.unseen_domains must be >= 1");
        cfg.data.unseen.resize(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
          if (cfg.data.unseen[static_cast<std::size_t>(i)].channel_scale.empty()) {
            cfg.data.unseen[static_cast<std::size_t>(i)] = default_unseen(i, cfg.data.scene.channels);
          }
        }
      }
    }
    for (const auto& [key, value] : body) {
      const std::string v = trim(value.data());
      try {
        const auto f = std::find_if(sec->fields.begin(), sec->fields.end(),
                                    [&](const Field& fd) { return fd.key == key; });
        if (f != sec->fields.end()) {
          f->set(cfg, v);
          continue;
        }
        std::smatch m;
        if (name == "data" && key == "unseen_domains") continue;
        if (name == "data" && std::regex_match(key, m, kUnseenKey)) {
          const int idx = std::stoi(m[1].str());
          if (idx < 1 || idx > static_cast<int>(cfg.data.unseen.size())) {
            throw FormatError("index outside 1..unseen_domains");
          }
          auto& spec = cfg.data.unseen[static_cast<std::size_t>(idx - 1)];
          const std::string field = m[2].str();
          if (field == "shift") spec.channel_mean_shift = parse_list(v);
          if (field == "scale") spec.channel_scale = parse_list(v);
          if (field == "noise_std") spec.noise_std = parse_number<double>(v);
          if (field == "texture_freq") spec.texture_freq = parse_number<double>(v);
          continue;
        }
        throw FormatError("unknown key");
      } catch (const FormatError& e) {
        throw FormatError("config: [" + name + "] " + key + ": " + e.what());
      } catch (const std::invalid_argument& e) {
        throw FormatError("config: [" + name + "] " + key + ": " + e.what());
      }
    }
  }
  cfg.data.scene.image_size = cfg.model.image_size;
  cfg.data.scene.patch_size = cfg.model.patch_size;
  cfg.data.scene.channels = cfg.model.channels;
  return cfg;
}

tuner::TrainConfig load_config(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return parse_config(std::string(bytes.begin(), bytes.end()));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const tuner::TrainConfig& cfg) {
  std::ostringstream out;
  out << "; ftune run configuration\n";
  bool first = true;
  for (const auto& sec : schema()) {
    out << (first ? "" : "\n") << "[" << sec.name << "]\n";
    first = false;
    for (const auto& f : sec.fields) out << f.key << " = " << f.get(cfg) << "\n";
    if (sec.name == "data") {
      out << "unseen_domains = " << cfg.data.unseen.size() << "\n";
      for (std::size_t i = 0; i < cfg.data.unseen.size(); ++i) {
        const auto& u = cfg.data.unseen[i];
        const std::string p = "unseen" + std::to_string(i + 1) + "_";
        out << p << "shift = " << join(u.channel_mean_shift) << "\n";
        out << p << "scale = " << join(u.channel_scale) << "\n";
        out << p << "noise_std = " << fmt(u.noise_std) << "\n";
        out << p << "texture_freq = " << fmt(u.texture_freq) << "\n";
      }
    }
  }
  return out.str();
}

}  // namespace ftune::io
