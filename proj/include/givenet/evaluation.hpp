#pragma once

#include "givenet/curve_fit.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace givenet {

struct EvalConfig {
  int test_episodes = 30;
  double threshold = 0.66;
  int train_min = 1;  // training range of instructions
  int train_max = 10;
  int extrap_min = 11;  // never trained on, tested at every checkpoint
  int extrap_max = 15;
};

/// Greedy test accuracy for N = 1..accuracy.size() at one checkpoint.
struct CheckpointRecord {
  long episode = 0;
  std::vector<double> accuracy;  // accuracy[N-1]
  std::vector<int> correct;      // correct[N-1] out of `episodes_per_n`
  int episodes_per_n = 0;

  double at(int n) const { return accuracy.at(static_cast<std::size_t>(n - 1)); }
  int max_instruction() const { return static_cast<int>(accuracy.size()); }
  /// Mean accuracy over [lo, hi].
  double mean(int lo, int hi) const;
};

/// First checkpoint episode at which accuracy reached the threshold, per N.
struct ThresholdTable {
  int n_min = 1;
  std::vector<std::optional<long>> crossing;  // crossing[N - n_min]

  std::optional<long> at(int n) const { return crossing.at(static_cast<std::size_t>(n - n_min)); }
  bool all_crossed() const;
};

ThresholdTable threshold_crossings(std::span<const CheckpointRecord> records, double threshold, int n_min, int n_max);

/// Fits the four families to (N, crossing episode) over crossed entries only.
/// Requires at least five points.
std::vector<FitResult> fit_trajectory(const ThresholdTable& table);

/// Episode with the highest mean accuracy over the training range; ties go
/// to the earliest. Extrapolation accuracies play no part.
long select_best_checkpoint(std::span<const CheckpointRecord> records, int train_min, int train_max);

struct ExtrapolationReport {
  long selected_episode = 0;
  std::map<int, double> at_selected;        // every N, at the selected checkpoint
  std::map<int, double> extrapolation;      // extrapolation N only
  std::map<int, double> best_any_time;      // training N only
  double extrapolation_mean() const;
};

ExtrapolationReport extrapolation_report(std::span<const CheckpointRecord> records, long selected_episode,
                                         const EvalConfig& cfg);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sample sd / sqrt(n); 0 for a single value
  double sd = 0.0;
  int n = 0;
};
MeanSe mean_se(std::span<const double> values);

struct RunResult {
  std::uint64_t seed = 0;
  std::string label;
  std::vector<CheckpointRecord> records;
};

struct EnsembleSummary {
  int total_runs = 0;
  int included_runs = 0;  // crossed the threshold for every training N
  bool no_qualifying_models() const { return included_runs == 0; }
  std::vector<std::uint64_t> included_seeds;

  // Accuracy statistics over every run.
  std::map<int, MeanSe> accuracy_at_best;   // all N
  std::map<int, MeanSe> best_any_time;      // training N only
  // Trajectory statistics over included runs only.
  std::map<int, MeanSe> crossing_episode;   // training N
  std::vector<std::vector<FitResult>> fits; // per included run
  std::vector<ThresholdTable> tables;       // per included run
  int sigmoid_preferred = 0;                // included runs whose best BIC family is sigmoidal
  MeanSe inflection;                        // sigmoid N0 over included runs with a converged sigmoid fit
};

EnsembleSummary ensemble_summary(std::span<const RunResult> runs, const EvalConfig& cfg);

}  // namespace givenet
