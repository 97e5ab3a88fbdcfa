// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "asd/kv_config.hpp"
#include "asd/training.hpp"

/// Subcommands of the `asd` tool. Every command takes the merged run
/// configuration (file plus overrides) and writes its artifacts atomically.
namespace asd::cli {

/// Raised by a progress hook to stop a run early; maps to exit code 130.
struct Interrupted : std::runtime_error {
  Interrupted() : std::runtime_error("interrupted") {}
};

/// Every key any subcommand understands.
const std::vector<std::string>& known_keys();

/// Parses the config file (if any), applies `--key value` overrides on top,
/// and rejects unknown keys.
config::KeyValues load_run_config(const std::filesystem::path& config_file,
                                  const std::vector<std::pair<std::string, std::string>>& overrides);

/// Defaults for every TrainConfig field, overridden by kv.
training::TrainConfig train_config(const config::KeyValues& kv);

inline constexpr const char* kCheckpointName = "checkpoint.asdc";
inline constexpr const char* kTrainLogName = "train_log.txt";
inline constexpr const char* kManifestName = "manifest.txt";
inline constexpr const char* kReportName = "report.txt";

/// Writes output_dir/{train,test}/{images,labels} and output_dir/manifest.txt.
void cmd_synth(const config::KeyValues& kv, std::ostream& out);

/// Trains on dataset_dir and writes output_dir/checkpoint.asdc and train_log.txt.
/// hooks are forwarded to training::train (used for progress and interrupts).
void cmd_train(const config::KeyValues& kv, std::ostream& out, const training::TrainCallbacks& hooks = {});

/// Scores dataset_dir/images/*.png with `checkpoint` into output_dir/NAME.{png,asdm}.
void cmd_score(const config::KeyValues& kv, std::ostream& out);

/// Pools maps_dir/*.asdm against dataset_dir/labels/*.png into output_dir/report.txt.
void cmd_eval(const config::KeyValues& kv, std::ostream& out);

/// One line per epoch: epoch l1 l2 l3 total R seconds, "-" for absent terms.
std::string format_log_line(std::size_t epoch, const training::EpochRecord& record);

/// Async-signal-safe; makes a running cmd_train stop with Interrupted.
void request_interrupt() noexcept;

/// Full command line: `asd <synth|train|score|eval> [--config FILE] [--key value ...]`.
/// Returns the process exit code; diagnostics go to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace asd::cli
