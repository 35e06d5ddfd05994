/* Copyright 2026 The lvcal Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "lvcal/experiment.h"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace lvcal {

namespace {

using Json = nlohmann::json;

constexpr char kVersion[] = "1.0.0";

struct Field {
  std::string key;  // "section.name" or "name" at top level
  std::function<Json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const Json&)> set;
};

std::string path_or_empty(const std::optional<std::filesystem::path>& p) {
  return p ? p->string() : std::string();
}

std::optional<std::filesystem::path> optional_path(const Json& j) {
  const auto s = j.get<std::string>();
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

template <typename T, typename Owner>
Field member(std::string key, Owner owner, T member_ptr) {
  return Field{
      std::move(key),
      [owner, member_ptr](const ExperimentConfig& c) {
        return Json(owner(const_cast<ExperimentConfig&>(c)).*member_ptr);
      },
      [owner, member_ptr](ExperimentConfig& c, const Json& j) {
        auto& obj = owner(c);
        using V = std::remove_reference_t<decltype(obj.*member_ptr)>;
        obj.*member_ptr = j.get<V>();
      }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = [] {
    auto top = [](ExperimentConfig& c) -> ExperimentConfig& { return c; };
    auto world = [](ExperimentConfig& c) -> WorldConfig& { return c.world; };
    auto train = [](ExperimentConfig& c) -> TrainSchedule& { return c.schedule; };
    auto bal = [](ExperimentConfig& c) -> BalancedSamplerConfig& { return c.balanced; };
    auto comb = [](ExperimentConfig& c) -> CombineOptions& { return c.combine; };
    auto dec = [](ExperimentConfig& c) -> DecodeConfig& { return c.decode; };
    auto ev = [](ExperimentConfig& c) -> EvalConfig& { return c.eval; };
    std::vector<Field> f;
    f.push_back(member("preset", top, &ExperimentConfig::preset));
    f.push_back(member("seed", top, &ExperimentConfig::seed));
    f.push_back(Field{"world_path",
                      [](const ExperimentConfig& c) { return Json(path_or_empty(c.world_path)); },
                      [](ExperimentConfig& c, const Json& j) { c.world_path = optional_path(j); }});
    f.push_back(Field{"counts_path",
                      [](const ExperimentConfig& c) { return Json(path_or_empty(c.counts_path)); },
                      [](ExperimentConfig& c, const Json& j) { c.counts_path = optional_path(j); }});
    f.push_back(member("ensemble_size", top, &ExperimentConfig::ensemble_size));
    f.push_back(member("cascade_stages", top, &ExperimentConfig::cascade_stages));

    f.push_back(member("world.num_categories", world, &WorldConfig::num_categories));
    f.push_back(member("world.feature_dim", world, &WorldConfig::feature_dim));
    f.push_back(member("world.zipf_exponent", world, &WorldConfig::zipf_exponent));
    f.push_back(member("world.total_instances", world, &WorldConfig::total_instances));
    f.push_back(member("world.min_objects_per_image", world, &WorldConfig::min_objects_per_image));
    f.push_back(member("world.max_objects_per_image", world, &WorldConfig::max_objects_per_image));
    f.push_back(member("world.val_fraction", world, &WorldConfig::val_fraction));
    f.push_back(member("world.val_min_instances", world, &WorldConfig::val_min_instances));
    f.push_back(member("world.recall_prob", world, &WorldConfig::recall_prob));
    f.push_back(member("world.box_jitter", world, &WorldConfig::box_jitter));
    f.push_back(member("world.min_box_size", world, &WorldConfig::min_box_size));
    f.push_back(member("world.max_box_size", world, &WorldConfig::max_box_size));
    f.push_back(member("world.background_per_image", world, &WorldConfig::background_per_image));
    f.push_back(member("world.feature_noise", world, &WorldConfig::feature_noise));
    f.push_back(member("world.noise_floor", world, &WorldConfig::noise_floor));
    f.push_back(member("world.prototype_groups", world, &WorldConfig::prototype_groups));
    f.push_back(member("world.group_correlation", world, &WorldConfig::group_correlation));

    f.push_back(Field{"train.mode",
                      [](const ExperimentConfig& c) { return Json(std::string(train_mode_name(c.mode))); },
                      [](ExperimentConfig& c, const Json& j) { c.mode = parse_train_mode(j.get<std::string>()); }});
    f.push_back(member("train.epochs", train, &TrainSchedule::epochs));
    f.push_back(Field{"train.lr_stages",
                      [](const ExperimentConfig& c) {
                        auto a = Json::array();
                        for (const auto& s : c.schedule.stages) a.push_back({s.start_epoch, s.learning_rate});
                        return a;
                      },
                      [](ExperimentConfig& c, const Json& j) {
                        std::vector<LrStage> stages;
                        for (const auto& e : j) {
                          if (!e.is_array() || e.size() != 2) {
                            throw Error("lr_stages entries must be [epoch, learning_rate]");
                          }
                          stages.push_back(LrStage{e[0].get<int>(), e[1].get<double>()});
                        }
                        c.schedule.stages = std::move(stages);
                      }});
    f.push_back(member("train.momentum", train, &TrainSchedule::momentum));
    f.push_back(member("train.minibatch_size", train, &TrainSchedule::minibatch_size));
    f.push_back(member("train.init_scale", train, &TrainSchedule::init_scale));

    f.push_back(member("balanced.classes_per_step", bal, &BalancedSamplerConfig::classes_per_step));
    f.push_back(member("balanced.images_per_class", bal, &BalancedSamplerConfig::images_per_class));
    f.push_back(member("balanced.include_background", bal, &BalancedSamplerConfig::include_background));
    f.push_back(member("balanced.background_ratio", bal, &BalancedSamplerConfig::background_ratio));
    f.push_back(member("balanced.iou_threshold", bal, &BalancedSamplerConfig::iou_threshold));
    f.push_back(member("balanced.steps_per_epoch", bal, &BalancedSamplerConfig::steps_per_epoch));

    f.push_back(member("repeat.threshold", top, &ExperimentConfig::repeat_threshold));

    f.push_back(Field{"calib.strategy",
                      [](const ExperimentConfig& c) { return Json(std::string(strategy_name(c.strategy))); },
                      [](ExperimentConfig& c, const Json& j) { c.strategy = parse_strategy(j.get<std::string>()); }});
    f.push_back(member("calib.threshold", comb, &CombineOptions::threshold));
    f.push_back(member("calib.invert_scale", comb, &CombineOptions::invert_scale));
    f.push_back(Field{"calib.tail_bins",
                      [](const ExperimentConfig& c) {
                        auto a = Json::array();
                        for (BinId b : c.tail_bins) a.push_back(bin_index(b));
                        return a;
                      },
                      [](ExperimentConfig& c, const Json& j) {
                        c.tail_bins.clear();
                        for (const auto& e : j) {
                          const int b = e.get<int>();
                          if (b < 0 || b >= kNumBins) throw Error("tail_bins entries must be 0..3");
                          c.tail_bins.push_back(static_cast<BinId>(b));
                        }
                      }});

    f.push_back(member("decode.score_threshold", dec, &DecodeConfig::score_threshold));
    f.push_back(member("decode.nms_iou", dec, &DecodeConfig::nms_iou));
    f.push_back(member("decode.max_per_image", dec, &DecodeConfig::max_per_image));

    f.push_back(member("eval.iou_thresholds", ev, &EvalConfig::iou_thresholds));
    f.push_back(member("eval.recall_points", ev, &EvalConfig::recall_points));
    f.push_back(member("eval.max_detections", ev, &EvalConfig::max_detections));
    f.push_back(member("eval.proposal_k", ev, &EvalConfig::proposal_k));
    return f;
  }();
  return kFields;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string && c == '\\') {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

std::string summary_csv(const std::vector<NamedReport>& reports) {
  std::string out = "report";
  for (BinId b : kAllBins) out += "," + csv_field("AP" + std::string(bin_label(b)));
  out += ",AP";
  for (BinId b : kAllBins) out += "," + csv_field("classes" + std::string(bin_label(b)));
  out += ",AR\n";
  for (const auto& r : reports) {
    out += r.name;
    for (int b = 0; b < kNumBins; ++b) out += "," + opt_fmt(r.report.per_bin_ap[b]);
    out += "," + opt_fmt(r.report.overall_ap);
    for (int b = 0; b < kNumBins; ++b) {
      out += "," + std::to_string(r.report.per_bin_class_count[b]);
    }
    out += "," + opt_fmt(r.report.ar_at_k) + "\n";
  }
  return out;
}

// Collects reports and files for one run.
class RunWriter {
 public:
  RunWriter(const ExperimentConfig& cfg, const World* world)
      : cfg_(cfg), world_(world) {
    std::filesystem::create_directories(cfg.out);
  }

  void report(const std::string& name, EvalReport r) {
    report(name, std::move(r), world_->categories);
  }

  void report(const std::string& name, EvalReport r,
              std::span<const Category> categories) {
    write_report(r, categories, cfg_.out, name);
    result_.files.push_back(cfg_.out / (name + ".csv"));
    result_.files.push_back(cfg_.out / (name + ".json"));
    result_.reports.push_back(NamedReport{name, std::move(r)});
  }

  void head(const std::string& name, const Head& h) {
    const auto path = cfg_.out / ("head_" + name + ".json");
    save_head(h, config_fingerprint(cfg_), path);
    result_.files.push_back(path);
  }

  void file(const std::string& name, const std::string& text) {
    write_text(cfg_.out / name, text);
    result_.files.push_back(cfg_.out / name);
  }

  ExperimentResult finish() {
    if (!result_.reports.empty()) file("summary.csv", summary_csv(result_.reports));
    nlohmann::ordered_json m;
    m["tool"] = "lvcal";
    m["version"] = kVersion;
    m["preset"] = cfg_.preset;
    m["seed"] = cfg_.seed;
    m["config_fingerprint"] = config_fingerprint(cfg_);
    m["config"] = render_config(cfg_);
    auto names = nlohmann::ordered_json::array();
    for (const auto& r : result_.reports) names.push_back(r.name);
    m["reports"] = std::move(names);
    file("manifest.json", m.dump(2) + "\n");
    return std::move(result_);
  }

 private:
  const ExperimentConfig& cfg_;
  const World* world_;
  ExperimentResult result_;
};

ExperimentResult run_table1(const ExperimentConfig& cfg) {
  std::vector<int> train;
  std::optional<std::vector<int>> val;
  World world;
  if (cfg.counts_path) {
    auto rows = read_count_file(*cfg.counts_path);
    std::sort(rows.begin(), rows.end());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].first == rows[i - 1].first) {
        throw Error("count file lists category " + std::to_string(rows[i].first) +
                    " twice");
      }
      train.push_back(rows[i].second);
    }
  } else {
    world = world_for(cfg);
    train = world.train_counts();
    std::vector<int> v;
    for (const auto& c : world.categories) v.push_back(c.val_count);
    val = std::move(v);
  }
  RunWriter writer(cfg, &world);
  writer.file("table1.csv", bin_table_csv(train, val));
  nlohmann::ordered_json j;
  auto sizes = bin_sizes(train);
  j["train"] = sizes;
  j["train_total"] = train.size();
  if (val) {
    std::array<int, kNumBins> on_val{};
    for (std::size_t c = 0; c < train.size(); ++c) {
      if ((*val)[c] > 0) ++on_val[bin_index(assign_bin(train[c]))];
    }
    j["train_on_val"] = on_val;
  }
  writer.file("table1.json", j.dump(2) + "\n");
  return writer.finish();
}

std::uint64_t index_of(int i) { return static_cast<std::uint64_t>(i); }

}  // namespace

std::string_view train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kStandard:
      return "standard";
    case TrainMode::kBalanced:
      return "balanced";
    case TrainMode::kRepeat:
      return "repeat";
  }
  return "?";
}

TrainMode parse_train_mode(std::string_view name) {
  for (TrainMode m : {TrainMode::kStandard, TrainMode::kBalanced, TrainMode::kRepeat}) {
    if (train_mode_name(m) == name) return m;
  }
  throw Error("unknown training mode `" + std::string(name) +
              "` (expected standard|balanced|repeat)");
}

void ExperimentConfig::validate() const {
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), preset) == names.end()) {
    throw Error("unknown preset `" + preset + "`");
  }
  if (!world_path) world.validate();
  if (world_path && !std::filesystem::exists(*world_path)) {
    throw Error("world file " + world_path->string() + " does not exist");
  }
  if (counts_path && !std::filesystem::exists(*counts_path)) {
    throw Error("count file " + counts_path->string() + " does not exist");
  }
  schedule.validate();
  balanced.validate();
  eval.validate();
  if (!(repeat_threshold > 0.0 && repeat_threshold < 1.0)) {
    throw Error("repeat.threshold must lie in (0,1)");
  }
  if (!(decode.nms_iou > 0.0 && decode.nms_iou <= 1.0)) {
    throw Error("decode.nms_iou must lie in (0,1]");
  }
  if (ensemble_size < 1 || cascade_stages < 1) {
    throw Error("ensemble_size and cascade_stages must be >= 1");
  }
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> kNames = {
      "custom", "table1", "table2", "table3", "table4",
      "table5", "table6", "table7", "table8"};
  return kNames;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    auto fail = [&](const std::string& msg) {
      throw Error(source + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected `key = value`");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    auto it = by_key.find(full);
    if (it == by_key.end()) fail("unknown key `" + full + "`");
    Json parsed;
    try {
      parsed = Json::parse(value);
    } catch (const Json::parse_error&) {
      fail("value of `" + full + "` is not a number, boolean, string or array");
    }
    try {
      it->second->set(cfg, parsed);
    } catch (const Json::exception&) {
      fail("value of `" + full + "` has the wrong type");
    } catch (const Error& e) {
      fail(e.what());
    }
  }
  cfg.world.seed = cfg.seed;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string render_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : f.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += name + " = " + f.get(cfg).dump() + "\n";
  }
  return out;
}

std::string config_fingerprint(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(render_config(cfg)));
  return buf;
}

const EvalReport& ExperimentResult::report(std::string_view name) const {
  for (const auto& r : reports) {
    if (r.name == name) return r.report;
  }
  throw Error("no report named `" + std::string(name) + "`");
}

Evaluator::Evaluator(const World& world, const DecodeConfig& decode,
                     const EvalConfig& eval)
    : world_(world),
      decode_(decode),
      eval_(eval),
      per_image_(frozen_proposals(world, Split::kVal)) {
  for (const auto& v : per_image_) flat_.insert(flat_.end(), v.begin(), v.end());
  features_.resize(static_cast<Eigen::Index>(flat_.size()), world.feature_dim());
  for (std::size_t i = 0; i < flat_.size(); ++i) {
    features_.row(static_cast<Eigen::Index>(i)) = flat_[i].feature.transpose();
  }
}

ScoreMatrix Evaluator::scores(const Head& head) const {
  return forward(head, features_);
}

std::vector<Detection> Evaluator::decode(const ScoreMatrix& scores) const {
  return decode_detections(flat_, scores, decode_);
}

EvalReport Evaluator::evaluate(std::span<const Detection> dets) const {
  EvalReport r = evaluate_detections(dets, world_.val_images, world_.categories, eval_);
  r.ar_at_k = average_recall();
  r.proposal_k = eval_.proposal_k;
  return r;
}

EvalReport Evaluator::evaluate(const ScoreMatrix& scores) const {
  return evaluate(decode(scores));
}

double Evaluator::average_recall() const {
  return proposal_recall(per_image_, world_.val_images, eval_.proposal_k, eval_);
}

World world_for(const ExperimentConfig& cfg) {
  if (cfg.world_path) return load_world(*cfg.world_path);
  WorldConfig wc = cfg.world;
  wc.seed = cfg.seed;
  return generate_world(wc);
}

Head train_head(const World& world, const ExperimentConfig& cfg, TrainMode mode,
                std::uint64_t stream_index) {
  Rng rng = derive_rng(cfg.seed, "train/" + std::string(train_mode_name(mode)),
                       stream_index);
  switch (mode) {
    case TrainMode::kStandard:
      return train_standard(world, cfg.schedule, rng);
    case TrainMode::kBalanced:
      return train_balanced(world, std::nullopt, cfg.balanced, cfg.schedule, rng);
    case TrainMode::kRepeat:
      return train_repeat_sampled(world, cfg.repeat_threshold, cfg.schedule, rng);
  }
  throw Error("unknown training mode");
}

std::string bin_table_csv(const std::vector<int>& train_counts,
                          const std::optional<std::vector<int>>& val_counts) {
  std::string out = "set";
  for (BinId b : kAllBins) out += "," + csv_field(bin_label(b));
  out += ",total\n";
  const auto sizes = bin_sizes(train_counts);
  out += "Train";
  for (int s : sizes) out += "," + std::to_string(s);
  out += "," + std::to_string(train_counts.size()) + "\n";
  if (val_counts) {
    std::array<int, kNumBins> on_val{};
    int total = 0;
    for (std::size_t c = 0; c < train_counts.size(); ++c) {
      if ((*val_counts)[c] <= 0) continue;
      ++on_val[bin_index(assign_bin(train_counts[c]))];
      ++total;
    }
    out += "Train-on-val";
    for (int s : on_val) out += "," + std::to_string(s);
    out += "," + std::to_string(total) + "\n";
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.preset == "table1") return run_table1(cfg);

  const World world = world_for(cfg);
  const Evaluator ev(world, cfg.decode, cfg.eval);
  const BinSplit split = BinSplit::from_categories(world.categories, cfg.tail_bins);
  RunWriter out(cfg, &world);

  auto standard = [&](int i = 0) { return train_head(world, cfg, TrainMode::kStandard, index_of(i)); };
  auto balanced = [&](int i = 0) { return train_head(world, cfg, TrainMode::kBalanced, index_of(i)); };

  if (cfg.preset == "table2") {
    const Head base = standard();
    out.head("mrcnn", base);
    const ScoreMatrix s = ev.scores(base);
    DecodeConfig thr = cfg.decode;
    thr.score_threshold = 0.05;
    out.report("mrcnn-thr", ev.evaluate(decode_detections(ev.proposals(), s, thr)));
    DecodeConfig zero = cfg.decode;
    zero.score_threshold = 0.0;
    out.report("mrcnn", ev.evaluate(decode_detections(ev.proposals(), s, zero)));
  } else if (cfg.preset == "table3") {
    const Head base = standard();
    out.head("lvis-like", base);
    out.report("lvis-like", ev.evaluate(ev.scores(base)));
    ExperimentConfig flat = cfg;
    flat.world_path.reset();
    flat.world.zipf_exponent = 0.0;
    const World coco = world_for(flat);
    const Evaluator coco_ev(coco, cfg.decode, cfg.eval);
    const Head coco_head = train_head(coco, flat, TrainMode::kStandard);
    out.head("coco-like", coco_head);
    out.report("coco-like", coco_ev.evaluate(coco_ev.scores(coco_head)),
               coco.categories);
  } else if (cfg.preset == "table4") {
    const Head base = standard();
    out.head("mrcnn", base);
    out.report("mrcnn", ev.evaluate(ev.scores(base)));
    const auto val_props = frozen_proposals(world, Split::kVal);
    out.report("props-gt", ev.evaluate(oracle_detections(val_props, world.val_images)));
  } else if (cfg.preset == "table5" || cfg.preset == "custom") {
    const bool custom = cfg.preset == "custom";
    const Head base = custom ? train_head(world, cfg, cfg.mode) : standard();
    const Head fresh = balanced();
    out.head(custom ? "baseline" : "mrcnn", base);
    out.head("rhead", fresh);
    const ScoreMatrix so = ev.scores(base);
    const ScoreMatrix sn = ev.scores(fresh);
    out.report(custom ? "baseline" : "mrcnn", ev.evaluate(so));
    const std::vector<Strategy> strategies =
        custom ? std::vector<Strategy>{cfg.strategy}
               : std::vector<Strategy>(kAllStrategies.begin(), kAllStrategies.end());
    for (Strategy s : strategies) {
      const std::string name =
          custom ? "calibrated" : "rhead-" + std::string(strategy_name(s));
      if (s == Strategy::kDet) {
        const auto merged = combine_detections_det(ev.decode(so), ev.decode(sn), split,
                                                   cfg.decode.max_per_image);
        out.report(name, ev.evaluate(merged));
      } else {
        out.report(name, ev.evaluate(combine(s, so, sn, split, cfg.combine)));
      }
    }
  } else if (cfg.preset == "table6") {
    std::vector<ScoreMatrix> orig, fresh;
    for (int s = 0; s < cfg.cascade_stages; ++s) {
      const Head h = standard(s);
      const Head n = balanced(s);
      out.head("stage" + std::to_string(s), h);
      out.head("rhead-stage" + std::to_string(s), n);
      orig.push_back(ev.scores(h));
      fresh.push_back(ev.scores(n));
    }
    const ScoreMatrix so = average_heads(orig);
    const ScoreMatrix sn = average_heads(fresh);
    out.report("htc", ev.evaluate(so));
    constexpr std::array<BinId, 1> kRareOnly = {BinId::kRare};
    const BinSplit rare = BinSplit::from_categories(world.categories, kRareOnly);
    out.report("calibration", ev.evaluate(combine(Strategy::kCat, so, sn, rare)));
  } else if (cfg.preset == "table7") {
    const Head base = standard();
    const Head rep = train_head(world, cfg, TrainMode::kRepeat);
    const Head fresh = balanced();
    out.head("mrcnn", base);
    out.head("img-sample", rep);
    out.head("rhead", fresh);
    const ScoreMatrix so = ev.scores(base);
    out.report("mrcnn", ev.evaluate(so));
    out.report("img-sample", ev.evaluate(ev.scores(rep)));
    out.report("calibration",
               ev.evaluate(combine(Strategy::kCat, so, ev.scores(fresh), split, cfg.combine)));
  } else if (cfg.preset == "table8") {
    std::vector<ScoreMatrix> plain, calibrated;
    for (int m = 0; m < cfg.ensemble_size; ++m) {
      const Head h = standard(m);
      const Head n = balanced(m);
      const std::string tag = "model" + std::to_string(m);
      out.head(tag, h);
      out.head(tag + "-rhead", n);
      plain.push_back(ev.scores(h));
      calibrated.push_back(combine(Strategy::kCat, plain.back(), ev.scores(n), split, cfg.combine));
      out.report(tag, ev.evaluate(plain.back()));
      out.report(tag + "-calibration", ev.evaluate(calibrated.back()));
    }
    out.report("ensemble", ev.evaluate(ensemble_models(plain)));
    out.report("ensemble-with-calibration", ev.evaluate(ensemble_models(calibrated)));
  }
  return out.finish();
}

}  // namespace lvcal
