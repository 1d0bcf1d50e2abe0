#include "givenet/evaluation.hpp"

#include "givenet/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace givenet {

double CheckpointRecord::mean(int lo, int hi) const {
  require(lo >= 1 && hi >= lo && hi <= max_instruction(), "CheckpointRecord::mean: range outside record");
  double s = 0.0;
  for (int n = lo; n <= hi; ++n) s += at(n);
  return s / static_cast<double>(hi - lo + 1);
}

bool ThresholdTable::all_crossed() const {
  return std::all_of(crossing.begin(), crossing.end(), [](const auto& c) { return c.has_value(); });
}

ThresholdTable threshold_crossings(std::span<const CheckpointRecord> records, double threshold, int n_min,
                                   int n_max) {
  ThresholdTable table;
  table.n_min = n_min;
  table.crossing.assign(static_cast<std::size_t>(n_max - n_min + 1), std::nullopt);
  for (const CheckpointRecord& rec : records) {
    for (int n = n_min; n <= n_max && n <= rec.max_instruction(); ++n) {
      auto& slot = table.crossing[static_cast<std::size_t>(n - n_min)];
      if (!slot && rec.at(n) >= threshold) slot = rec.episode;
    }
  }
  return table;
}

std::vector<FitResult> fit_trajectory(const ThresholdTable& table) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < table.crossing.size(); ++i) {
    if (!table.crossing[i]) continue;
    x.push_back(static_cast<double>(table.n_min + static_cast<int>(i)));
    y.push_back(static_cast<double>(*table.crossing[i]));
  }
  require(x.size() >= 5, "fit_trajectory: needs at least five crossed instructions, got " + std::to_string(x.size()));
  return fit_all(x, y);
}

long select_best_checkpoint(std::span<const CheckpointRecord> records, int train_min, int train_max) {
  require(!records.empty(), "select_best_checkpoint: no checkpoints");
  const CheckpointRecord* best = &records.front();
  double best_mean = best->mean(train_min, train_max);
  for (const CheckpointRecord& rec : records.subspan(1)) {
    const double m = rec.mean(train_min, train_max);
    if (m > best_mean || (m == best_mean && rec.episode < best->episode)) {
      best = &rec;
      best_mean = m;
    }
  }
  return best->episode;
}

double ExtrapolationReport::extrapolation_mean() const {
  if (extrapolation.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [n, a] : extrapolation) s += a;
  return s / static_cast<double>(extrapolation.size());
}

ExtrapolationReport extrapolation_report(std::span<const CheckpointRecord> records, long selected_episode,
                                         const EvalConfig& cfg) {
  const auto it = std::find_if(records.begin(), records.end(),
                               [&](const CheckpointRecord& r) { return r.episode == selected_episode; });
  require(it != records.end(), "extrapolation_report: episode " + std::to_string(selected_episode) + " not recorded");
  ExtrapolationReport rep;
  rep.selected_episode = selected_episode;
  for (int n = 1; n <= it->max_instruction(); ++n) rep.at_selected[n] = it->at(n);
  for (int n = cfg.extrap_min; n <= cfg.extrap_max && n <= it->max_instruction(); ++n)
    rep.extrapolation[n] = it->at(n);
  for (int n = cfg.train_min; n <= cfg.train_max; ++n) {
    double best = 0.0;
    for (const CheckpointRecord& r : records) best = std::max(best, r.at(n));
    rep.best_any_time[n] = best;
  }
  return rep;
}

MeanSe mean_se(std::span<const double> v) {
  MeanSe out;
  out.n = static_cast<int>(v.size());
  if (v.empty()) return out;
  double s = 0.0;
  for (double x : v) s += x;
  out.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    out.se = out.sd / std::sqrt(static_cast<double>(v.size()));
  }
  return out;
}

EnsembleSummary ensemble_summary(std::span<const RunResult> runs, const EvalConfig& cfg) {
  require(!runs.empty(), "ensemble_summary: no runs");
  EnsembleSummary s;
  s.total_runs = static_cast<int>(runs.size());

  std::map<int, std::vector<double>> at_best, best_any, crossings;
  std::vector<double> inflections;
  for (const RunResult& run : runs) {
    if (run.records.empty()) continue;
    const long sel = select_best_checkpoint(run.records, cfg.train_min, cfg.train_max);
    const ExtrapolationReport rep = extrapolation_report(run.records, sel, cfg);
    for (const auto& [n, a] : rep.at_selected) at_best[n].push_back(a);
    for (const auto& [n, a] : rep.best_any_time) best_any[n].push_back(a);

    const ThresholdTable table = threshold_crossings(run.records, cfg.threshold, cfg.train_min, cfg.train_max);
    if (!table.all_crossed()) continue;
    ++s.included_runs;
    s.included_seeds.push_back(run.seed);
    s.tables.push_back(table);
    for (int n = cfg.train_min; n <= cfg.train_max; ++n) crossings[n].push_back(static_cast<double>(*table.at(n)));
    if (cfg.train_max - cfg.train_min + 1 >= 5) {
      std::vector<FitResult> fits = fit_trajectory(table);
      if (best_fit(fits).family == CurveFamily::sigmoidal) ++s.sigmoid_preferred;
      const FitResult& sig = fits[3];
      if (sig.converged && sig.inflection) inflections.push_back(*sig.inflection);
      s.fits.push_back(std::move(fits));
    }
  }
  for (const auto& [n, v] : at_best) s.accuracy_at_best[n] = mean_se(v);
  for (const auto& [n, v] : best_any) s.best_any_time[n] = mean_se(v);
  for (const auto& [n, v] : crossings) s.crossing_episode[n] = mean_se(v);
  s.inflection = mean_se(inflections);
  return s;
}

}  // namespace givenet
