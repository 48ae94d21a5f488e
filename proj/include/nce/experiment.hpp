#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "nce/config.hpp"
#include "nce/landscape.hpp"

namespace nce {

struct ResultRow {
  std::string loss;
  std::string algo;
  std::size_t run = 0;
  std::size_t step = 0;
  double loss_value = 0.0;
  double grad_norm = 0.0;
  double dist = 0.0;
  double min_dist = 0.0;
  std::string status = "ok";

  bool operator==(const ResultRow&) const = default;
};

struct StepSizeInfo {
  std::string loss;
  std::string algo;
  double eta = 0.0;
  std::string source;  // "config" or the auto policy used
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<StepSizeInfo> step_sizes;
  // (loss, algo) -> run with the lowest held-out loss at its last iterate
  std::map<std::pair<std::string, std::string>, std::size_t> best_run;
};

ResultTable run_experiment(const ExperimentConfig& config);

// Header loss,algo,run,step,loss_value,grad_norm,dist,min_dist,status; 17 significant digits.
void write_csv(const ResultTable& table, const std::string& path);
ResultTable read_csv(const std::string& path);

// One whitespace-separated file per (loss, algo) with step, mean/std over runs
// and best-run min_dist, plus a companion file for log10(loss). Files are
// named <stem>_<loss>_<algo>.dat and <stem>_<loss>_<algo>_log10loss.dat.
std::vector<std::string> emit_plot_data(const ResultTable& table, const std::string& stem);

// Step sizes and per-cell outcomes, human readable.
std::string summarize(const ExperimentConfig& config, const ResultTable& table);

// NCE_OUTPUT_DIR when set, else [output] dir.
std::string output_dir(const ExperimentConfig& config);

CertifySetup certify_setup(const ExperimentConfig& config);

// Subcommands. Each returns the process exit status.
int run_command(const ExperimentConfig& config, std::ostream& log);
// 0 when every non-skipped check passes, 1 on a failed check, 2 when a check
// could not be evaluated.
int verify_command(const ExperimentConfig& config, std::ostream& log);
int landscape_command(const ExperimentConfig& config, std::ostream& log);

}  // namespace nce
