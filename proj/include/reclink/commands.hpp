#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "reclink/config.hpp"

namespace reclink {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitResource = 3, kExitNumerical = 4 };

/// f1.csv, f2.csv, schema.json, truth_blocks.csv, truth_links.csv, manifest.json.
void cmd_simulate(const RunConfig& cfg);

/// samples.jsonl, diagnostics.json, manifest.json and, when enabled,
/// block_logprob.csv and record_logprob.csv. Nothing is written on failure.
/// Returns kExitNumerical when the parameter draws degenerated.
int cmd_link(const RunConfig& cfg);

/// metrics.csv: one row per sample, then mean and sd rows.
void cmd_evaluate(const RunConfig& cfg);

/// mi.csv: one row per exposure (log odds ratio combined over samples) and an
/// n_links row. Returns kExitNumerical when every fit hit separation.
int cmd_analyze(const RunConfig& cfg);

/// summary.csv over the error grid.
void cmd_study(const RunConfig& cfg);

/// Loads a run config or a manifest written by an earlier run.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace reclink
