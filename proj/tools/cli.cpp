// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>

#include "asd/checkpoint.hpp"
#include "asd/data.hpp"
#include "asd/error.hpp"
#include "asd/eval.hpp"
#include "asd/png_io.hpp"
#include "asd/scoring.hpp"

namespace asd::cli {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupt{false};

const std::vector<std::string>& synth_keys() {
  static const std::vector<std::string> keys{
      "height",         "width",          "bands",       "texture_family",     "anomaly_count_min",
      "anomaly_count_max", "anomaly_radius_min", "anomaly_radius_max", "train_count", "test_count",
      "synth_seed",
  };
  return keys;
}

const std::vector<std::string>& path_keys() {
  static const std::vector<std::string> keys{"dataset_dir", "output_dir", "checkpoint", "maps_dir", "normal_class"};
  return keys;
}

std::string require(const config::KeyValues& kv, const char* key, const char* command) {
  const auto v = kv.get(key);
  if (!v || v->empty()) throw ContractError(std::string(command) + ": missing required key '" + key + "'");
  return *v;
}

void require_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("missing directory: " + dir.string());
}

/// Creates dir and proves it writable before any real work starts.
void prepare_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  io::write_file_atomic(dir / ".asd_probe", std::string_view("probe\n"));
  fs::remove(dir / ".asd_probe", ec);
}

data::SyntheticSpec synth_spec(const config::KeyValues& kv) {
  data::SyntheticSpec s;
  auto u = [&](const char* key, auto& field) {
    if (auto v = kv.get(key)) field = static_cast<std::remove_reference_t<decltype(field)>>(config::parse_uint(*v, key));
  };
  u("height", s.height);
  u("width", s.width);
  u("bands", s.bands);
  u("texture_family", s.texture_family);
  u("anomaly_count_min", s.anomaly_count_min);
  u("anomaly_count_max", s.anomaly_count_max);
  u("anomaly_radius_min", s.anomaly_radius_min);
  u("anomaly_radius_max", s.anomaly_radius_max);
  u("train_count", s.train_count);
  u("test_count", s.test_count);
  u("synth_seed", s.seed);
  data::validate(s);
  return s;
}

config::KeyValues synth_echo(const data::SyntheticSpec& s) {
  config::KeyValues kv;
  kv.set("height", std::to_string(s.height));
  kv.set("width", std::to_string(s.width));
  kv.set("bands", std::to_string(s.bands));
  kv.set("texture_family", std::to_string(s.texture_family));
  kv.set("anomaly_count_min", std::to_string(s.anomaly_count_min));
  kv.set("anomaly_count_max", std::to_string(s.anomaly_count_max));
  kv.set("anomaly_radius_min", std::to_string(s.anomaly_radius_min));
  kv.set("anomaly_radius_max", std::to_string(s.anomaly_radius_max));
  kv.set("train_count", std::to_string(s.train_count));
  kv.set("test_count", std::to_string(s.test_count));
  kv.set("synth_seed", std::to_string(s.seed));
  return kv;
}

std::int32_t normal_class(const config::KeyValues& kv) {
  const auto v = kv.get("normal_class");
  return v ? static_cast<std::int32_t>(config::parse_int(*v, "normal_class")) : 0;
}

std::string echo_block(const config::KeyValues& kv) {
  std::string text = "# config\n";
  for (const auto& [k, v] : kv.entries()) text += "config." + k + " = " + v + "\n";
  return text;
}

std::string log_value(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", *v);
  return buf;
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> all = training::train_keys();
    all.insert(all.end(), synth_keys().begin(), synth_keys().end());
    all.insert(all.end(), path_keys().begin(), path_keys().end());
    return all;
  }();
  return keys;
}

config::KeyValues load_run_config(const fs::path& config_file,
                                  const std::vector<std::pair<std::string, std::string>>& overrides) {
  config::KeyValues kv;
  if (!config_file.empty()) {
    if (!fs::is_regular_file(config_file)) throw IoError("missing config file: " + config_file.string());
    const auto bytes = io::read_file(config_file);
    kv = config::KeyValues::parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  for (const auto& [k, v] : overrides) kv.set(k, v);
  const std::set<std::string> known(known_keys().begin(), known_keys().end());
  for (const auto& [k, v] : kv.entries()) {
    if (!known.contains(k)) throw ContractError("unknown config key '" + k + "'");
  }
  return kv;
}

training::TrainConfig train_config(const config::KeyValues& kv) {
  training::TrainConfig c;
  training::apply_key_values(kv, c);
  training::validate(c);
  return c;
}

std::string format_log_line(std::size_t epoch, const training::EpochRecord& r) {
  char seconds[32];
  std::snprintf(seconds, sizeof seconds, "%.3f", r.seconds);
  return std::to_string(epoch + 1) + " " + log_value(r.compact) + " " + log_value(r.diverse) + " " +
         log_value(r.reconstruct) + " " + log_value(r.total) + " " + log_value(r.radius) + " " + seconds;
}

void cmd_synth(const config::KeyValues& kv, std::ostream& out) {
  const fs::path output = require(kv, "output_dir", "synth");
  const data::SyntheticSpec spec = synth_spec(kv);
  prepare_output_dir(output);

  const data::SyntheticDataset ds = data::generate_synthetic(spec);
  data::write_dataset(output / "train", ds.train);
  data::write_dataset(output / "test", ds.test);

  config::KeyValues manifest;
  std::string per_image;
  for (const auto& [split, samples] : {std::pair{"train", &ds.train}, std::pair{"test", &ds.test}}) {
    std::uint64_t anomalous = 0, pixels = 0;
    for (std::size_t n = 0; n < samples->size(); ++n) {
      const LabelMap& labels = (*samples)[n].labels;
      const double fraction = data::anomaly_fraction(labels, 0);
      anomalous += static_cast<std::uint64_t>(std::llround(fraction * static_cast<double>(labels.size())));
      pixels += labels.size();
      char name[32];
      std::snprintf(name, sizeof name, "img_%04zu", n);
      per_image += std::string("fraction.") + split + "." + name + " = " + config::format_double(fraction) + "\n";
    }
    manifest.set(std::string(split) + "_images", std::to_string(samples->size()));
    manifest.set(std::string(split) + "_anomaly_pixels", std::to_string(anomalous));
    manifest.set(std::string(split) + "_anomaly_fraction",
                 config::format_double(pixels ? static_cast<double>(anomalous) / static_cast<double>(pixels) : 0.0));
  }
  const std::string text = manifest.to_text() + per_image + echo_block(synth_echo(spec));
  io::write_file_atomic(output / kManifestName, text);
  out << manifest.to_text();
}

namespace {

std::vector<training::TrainingSample> load_training_set(const fs::path& dir, std::int32_t normal) {
  const auto entries = data::list_dataset(dir);
  if (entries.empty()) throw ContractError("train: no images in " + (dir / "images").string());
  std::vector<training::TrainingSample> samples;
  for (const auto& e : entries) {
    data::LabeledImage li = data::load_labeled_image(e.image_path, e.label_path);
    try {
      samples.push_back({std::move(li.image), data::make_normal_mask(li.labels, normal)});
    } catch (const ContractError& err) {
      throw ContractError(e.label_path.string() + ": " + err.what());
    }
  }
  return samples;
}

}  // namespace

void cmd_train(const config::KeyValues& kv, std::ostream& out, const training::TrainCallbacks& hooks) {
  const fs::path dataset = require(kv, "dataset_dir", "train");
  const fs::path output = require(kv, "output_dir", "train");
  const training::TrainConfig config = train_config(kv);
  require_directory(dataset / "images");
  require_directory(dataset / "labels");
  prepare_output_dir(output);

  const auto samples = load_training_set(dataset, normal_class(kv));

  std::string log = "# epoch l1 l2 l3 total R seconds\n";
  training::TrainCallbacks callbacks;
  callbacks.on_image = [&](const training::ProgressEvent& event) {
    if (g_interrupt.load()) throw Interrupted();
    if (hooks.on_image) hooks.on_image(event);
  };
  callbacks.on_epoch = [&](std::size_t epoch, const training::EpochRecord& record) {
    const std::string line = format_log_line(epoch, record);
    log += line + "\n";
    out << line << '\n' << std::flush;
    if (hooks.on_epoch) hooks.on_epoch(epoch, record);
  };
  const training::Checkpoint ckpt = training::train(samples, config, callbacks);
  training::save_checkpoint(output / kCheckpointName, ckpt);
  io::write_file_atomic(output / kTrainLogName, log);
}

void cmd_score(const config::KeyValues& kv, std::ostream& out) {
  const fs::path checkpoint = require(kv, "checkpoint", "score");
  const fs::path dataset = require(kv, "dataset_dir", "score");
  const fs::path output = require(kv, "output_dir", "score");
  if (!fs::is_regular_file(checkpoint)) throw IoError("missing checkpoint: " + checkpoint.string());
  require_directory(dataset / "images");
  prepare_output_dir(output);

  const training::Checkpoint ckpt = training::load_checkpoint(checkpoint);
  const auto entries = data::list_images(dataset);
  for (const auto& e : entries) {
    const scoring::AnomalyMap map = scoring::score_image(data::load_image(e.image_path), ckpt);
    scoring::write_score_png(output / (e.name + ".png"), map.scores);
    scoring::write_sidecar(output / (e.name + ".asdm"), map.degrees);
  }
  out << "scored " << entries.size() << " images into " << output.string() << '\n';
}

void cmd_eval(const config::KeyValues& kv, std::ostream& out) {
  const fs::path maps = require(kv, "maps_dir", "eval");
  const fs::path dataset = require(kv, "dataset_dir", "eval");
  const fs::path output = require(kv, "output_dir", "eval");
  require_directory(maps);
  require_directory(dataset / "labels");
  prepare_output_dir(output);
  const std::int32_t normal = normal_class(kv);

  std::map<std::string, fs::path> sidecars, labels;
  for (const auto& item : fs::directory_iterator(maps)) {
    if (item.is_regular_file() && item.path().extension() == ".asdm") sidecars[item.path().stem().string()] = item.path();
  }
  for (const auto& item : fs::directory_iterator(dataset / "labels")) {
    if (item.is_regular_file() && item.path().extension() == ".png") labels[item.path().stem().string()] = item.path();
  }
  for (const auto& [name, path] : sidecars) {
    if (!labels.contains(name)) throw IoError("unpaired map " + path.string() + ": no label " + name + ".png");
  }
  for (const auto& [name, path] : labels) {
    if (!sidecars.contains(name)) throw IoError("unpaired label " + path.string() + ": no map " + name + ".asdm");
  }
  if (labels.empty()) throw ContractError("eval: no maps to evaluate in " + maps.string());

  std::vector<double> degrees;
  std::vector<std::uint8_t> truth;
  for (const auto& [name, label_path] : labels) {
    const scoring::SidecarPlane map = scoring::read_sidecar(sidecars.at(name));
    const LabelMap gt = data::load_label_map(label_path);
    if (map.height() != gt.height() || map.width() != gt.width()) {
      throw ContractError("eval: " + name + ": map is " + std::to_string(map.height()) + "x" +
                          std::to_string(map.width()) + " but label is " + std::to_string(gt.height()) + "x" +
                          std::to_string(gt.width()));
    }
    for (std::size_t p = 0; p < gt.size(); ++p) {
      degrees.push_back(map[p]);
      truth.push_back(gt[p] != normal ? 1 : 0);
    }
  }

  const eval::RocCurve curve = eval::roc_auc(degrees, truth);
  const eval::RocPoint best = eval::select_threshold(curve);
  std::vector<std::uint8_t> predicted(degrees.size());
  for (std::size_t i = 0; i < degrees.size(); ++i) predicted[i] = degrees[i] >= best.threshold ? 1 : 0;
  eval::Confusion confusion;
  confusion.add(predicted, truth);

  eval::Report report;
  report.auc = curve.auc;
  report.miou = confusion.miou();
  report.threshold = best.threshold;
  report.pixels = degrees.size();
  report.anomaly_pixels = curve.positives;
  report.normal_pixels = curve.negatives;
  report.images = labels.size();
  eval::write_report(output / kReportName, report, kv.to_text());
  out << eval::format_report(report);
}

void request_interrupt() noexcept { g_interrupt.store(true); }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anomaly segmentation: synth, train, score, eval", "asd"};
  app.require_subcommand(1, 1);
  std::string config_file;
  struct Command {
    const char* name;
    const char* help;
    void (*fn)(const config::KeyValues&, std::ostream&);
  };
  static const Command commands[] = {
      {"synth", "Generate a synthetic dataset", &cmd_synth},
      {"train", "Train a model and write a checkpoint",
       [](const config::KeyValues& kv, std::ostream& o) { cmd_train(kv, o); }},
      {"score", "Write anomaly maps for a directory of images", &cmd_score},
      {"eval", "Compute AUC and mIOU for anomaly maps", &cmd_eval},
  };
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_file, "key = value configuration file");
    sub->allow_extras();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "asd: " << e.what() << '\n';
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    const std::vector<std::string> extras = sub->remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const std::string& arg = extras[i];
      if (!arg.starts_with("--") || arg.size() < 3) throw ContractError("unexpected argument '" + arg + "'");
      const std::size_t eq = arg.find('=');
      if (eq != std::string::npos) {
        overrides.emplace_back(arg.substr(2, eq - 2), arg.substr(eq + 1));
      } else {
        if (i + 1 >= extras.size()) throw ContractError("option '" + arg + "' needs a value");
        overrides.emplace_back(arg.substr(2), extras[++i]);
      }
    }
    const config::KeyValues kv = load_run_config(config_file, overrides);
    for (const Command& c : commands) {
      if (sub->get_name() == c.name) c.fn(kv, out);
    }
    return 0;
  } catch (const Interrupted&) {
    err << "asd " << sub->get_name() << ": interrupted; no artifact written\n";
    return 130;
  } catch (const ContractError& e) {
    err << "asd " << sub->get_name() << ": " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    err << "asd " << sub->get_name() << ": " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "asd " << sub->get_name() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "asd " << sub->get_name() << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace asd::cli
