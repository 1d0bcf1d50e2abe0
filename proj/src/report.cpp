#include "givenet/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace givenet {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool is_run_dir(const fs::path& p) { return fs::exists(p / "metrics.csv") && fs::exists(p / "config.json"); }

nlohmann::ordered_json fit_json(const FitResult& f) {
  nlohmann::ordered_json j;
  j["family"] = to_string(f.family);
  j["formula"] = formula(f.family);
  j["converged"] = f.converged;
  j["params"] = f.params;
  j["rss"] = f.converged ? nlohmann::ordered_json(f.rss) : nlohmann::ordered_json(nullptr);
  j["bic"] = std::isfinite(f.bic) ? nlohmann::ordered_json(f.bic) : nlohmann::ordered_json(nullptr);
  if (f.inflection) j["inflection"] = *f.inflection;
  return j;
}

struct Group {
  std::string agent;
  EvalConfig eval;
  std::vector<RunResult> runs;
};

// --- SVG ---

struct Frame {
  double left = 70, right = 20, top = 40, bottom = 50, width = 640, height = 400;
  double x0() const { return left; }
  double x1() const { return width - right; }
  double y0() const { return height - bottom; }
  double y1() const { return top; }
};

std::string svg_open(const Frame& f, const std::string& title) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
     << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << f.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << f.x0() << "\" y1=\"" << f.y0() << "\" x2=\"" << f.x1() << "\" y2=\"" << f.y0()
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << f.x0() << "\" y1=\"" << f.y0() << "\" x2=\"" << f.x0() << "\" y2=\"" << f.y1()
     << "\" stroke=\"black\"/>\n";
  return os.str();
}

std::string fig2_svg(const Group& g, const EnsembleSummary& s) {
  Frame f;
  const int n_max = g.eval.extrap_max;
  const double slot = (f.x1() - f.x0()) / n_max;
  auto y = [&](double v) { return f.y0() - v * (f.y0() - f.y1()); };
  std::ostringstream os;
  os << svg_open(f, g.agent + ": accuracy at best-average checkpoint (dark) and best at any time (light)");
  for (int k = 0; k <= 5; ++k) {
    const double v = k / 5.0;
    os << "<line x1=\"" << f.x0() - 4 << "\" y1=\"" << y(v) << "\" x2=\"" << f.x0() << "\" y2=\"" << y(v)
       << "\" stroke=\"black\"/><text x=\"" << f.x0() - 8 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\">"
       << fmt("%.1f", v) << "</text>\n";
  }
  os << "<text x=\"18\" y=\"" << (f.y0() + f.y1()) / 2 << "\" transform=\"rotate(-90 18 " << (f.y0() + f.y1()) / 2
     << ")\" text-anchor=\"middle\">accuracy</text>\n";
  os << "<text x=\"" << (f.x0() + f.x1()) / 2 << "\" y=\"" << f.height - 12 << "\" text-anchor=\"middle\">N</text>\n";
  const double bw = slot * 0.35;
  auto bar = [&](double x, const MeanSe& m, const char* colour) {
    os << "<rect x=\"" << fmt("%.2f", x) << "\" y=\"" << fmt("%.2f", y(m.mean)) << "\" width=\"" << fmt("%.2f", bw)
       << "\" height=\"" << fmt("%.2f", f.y0() - y(m.mean)) << "\" fill=\"" << colour << "\"/>\n";
    const double cx = x + bw / 2;
    const double lo = std::max(0.0, m.mean - m.se), hi = std::min(1.0, m.mean + m.se);
    os << "<line x1=\"" << fmt("%.2f", cx) << "\" y1=\"" << fmt("%.2f", y(lo)) << "\" x2=\"" << fmt("%.2f", cx)
       << "\" y2=\"" << fmt("%.2f", y(hi)) << "\" stroke=\"black\"/>\n";
  };
  for (int n = 1; n <= n_max; ++n) {
    const double left = f.x0() + (n - 1) * slot + slot * 0.12;
    bar(left, s.accuracy_at_best.at(n), "#1f3b73");
    if (s.best_any_time.count(n)) bar(left + bw, s.best_any_time.at(n), "#8fb3e8");
    os << "<text x=\"" << fmt("%.2f", f.x0() + (n - 0.5) * slot) << "\" y=\"" << f.y0() + 16
       << "\" text-anchor=\"middle\">" << n << "</text>\n";
  }
  const double bx = f.x0() + g.eval.train_max * slot;
  os << "<line x1=\"" << fmt("%.2f", bx) << "\" y1=\"" << f.y1() << "\" x2=\"" << fmt("%.2f", bx) << "\" y2=\""
     << f.y0() << "\" stroke=\"red\" stroke-width=\"2\" stroke-dasharray=\"6 4\"/>\n";
  os << "</svg>\n";
  return os.str();
}

std::string fig3_svg(const Group& g, const EnsembleSummary& s) {
  Frame f;
  std::ostringstream os;
  const std::string title = g.agent + ": episode of first 66% crossing (mean +- sd, n=" +
                            std::to_string(s.included_runs) + "/" + std::to_string(s.total_runs) + ")";
  os << svg_open(f, title);
  double y_max = 1.0;
  for (const auto& [n, m] : s.crossing_episode) y_max = std::max(y_max, m.mean + m.sd);
  // round the axis up to a 1-2-5 step
  double step = std::pow(10.0, std::floor(std::log10(y_max / 5)));
  for (double mult : {1.0, 2.0, 5.0, 10.0})
    if (y_max / (step * mult) <= 5) {
      step *= mult;
      break;
    }
  const double top = step * std::ceil(y_max / step);
  const int n_lo = g.eval.train_min, n_hi = g.eval.train_max;
  auto x = [&](double n) { return f.x0() + (n - n_lo + 0.5) / (n_hi - n_lo + 1) * (f.x1() - f.x0()); };
  auto y = [&](double v) { return f.y0() - v / top * (f.y0() - f.y1()); };
  for (double v = 0; v <= top + 1e-9; v += step)
    os << "<line x1=\"" << f.x0() - 4 << "\" y1=\"" << fmt("%.2f", y(v)) << "\" x2=\"" << f.x0() << "\" y2=\""
       << fmt("%.2f", y(v)) << "\" stroke=\"black\"/><text x=\"" << f.x0() - 8 << "\" y=\""
       << fmt("%.2f", y(v) + 4) << "\" text-anchor=\"end\">" << fmt("%.0f", v) << "</text>\n";
  for (int n = n_lo; n <= n_hi; ++n)
    os << "<text x=\"" << fmt("%.2f", x(n)) << "\" y=\"" << f.y0() + 16 << "\" text-anchor=\"middle\">" << n
       << "</text>\n";
  os << "<text x=\"" << (f.x0() + f.x1()) / 2 << "\" y=\"" << f.height - 12 << "\" text-anchor=\"middle\">N</text>\n";
  os << "<text x=\"14\" y=\"" << (f.y0() + f.y1()) / 2 << "\" transform=\"rotate(-90 14 " << (f.y0() + f.y1()) / 2
     << ")\" text-anchor=\"middle\">episode</text>\n";
  std::string path;
  for (const auto& [n, m] : s.crossing_episode) {
    if (m.n == 0) continue;
    const double cx = x(n);
    os << "<line x1=\"" << fmt("%.2f", cx) << "\" y1=\"" << fmt("%.2f", y(std::max(0.0, m.mean - m.sd)))
       << "\" x2=\"" << fmt("%.2f", cx) << "\" y2=\"" << fmt("%.2f", y(m.mean + m.sd)) << "\" stroke=\"black\"/>\n";
    os << "<circle cx=\"" << fmt("%.2f", cx) << "\" cy=\"" << fmt("%.2f", y(m.mean))
       << "\" r=\"4\" fill=\"#1f3b73\"/>\n";
    path += (path.empty() ? "M" : " L") + fmt("%.2f", cx) + " " + fmt("%.2f", y(m.mean));
  }
  if (!path.empty()) os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"#1f3b73\"/>\n";
  if (s.no_qualifying_models())
    os << "<text x=\"" << (f.x0() + f.x1()) / 2 << "\" y=\"" << (f.y0() + f.y1()) / 2
       << "\" text-anchor=\"middle\">no qualifying models</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::vector<CheckpointRecord> parse_metrics(const std::string& csv, int episodes_per_n) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line.rfind("episode,phase,n_max", 0) != 0)
    throw std::runtime_error("metrics.csv: unexpected header");
  std::vector<CheckpointRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    CheckpointRecord r;
    r.episodes_per_n = episodes_per_n;
    std::getline(row, cell, ',');
    r.episode = std::stol(cell);
    std::getline(row, cell, ',');  // phase
    std::getline(row, cell, ',');  // n_max
    while (std::getline(row, cell, ',')) {
      const double a = std::stod(cell);
      const int c = static_cast<int>(std::lround(a * episodes_per_n));
      r.correct.push_back(c);
      r.accuracy.push_back(static_cast<double>(c) / episodes_per_n);
    }
    out.push_back(std::move(r));
  }
  return out;
}

LoadedRun load_run(const fs::path& dir) {
  LoadedRun run;
  run.path = dir;
  run.config = config_from_json(slurp(dir / "config.json"));
  if (run.config.seeds.size() != 1) throw std::runtime_error(dir.string() + ": snapshot must name exactly one seed");
  run.result.seed = run.config.seeds[0];
  run.result.label = to_string(run.config.agent);
  run.result.records = parse_metrics(slurp(dir / "metrics.csv"), run.config.run.eval.test_episodes);
  return run;
}

std::vector<LoadedRun> collect_runs(const std::vector<fs::path>& paths) {
  std::vector<fs::path> dirs;
  for (const fs::path& p : paths) {
    if (!fs::exists(p)) throw ConfigError("no such run directory: " + p.string());
    if (is_run_dir(p)) {
      dirs.push_back(p);
      continue;
    }
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_directory() && is_run_dir(e.path())) dirs.push_back(e.path());
  }
  std::vector<LoadedRun> runs;
  for (const fs::path& d : dirs) runs.push_back(load_run(d));
  std::sort(runs.begin(), runs.end(), [](const LoadedRun& a, const LoadedRun& b) {
    if (a.result.label != b.result.label) return a.result.label < b.result.label;
    if (a.result.seed != b.result.seed) return a.result.seed < b.result.seed;
    return a.path < b.path;
  });
  return runs;
}

std::string write_report(const std::vector<LoadedRun>& runs, const fs::path& out_dir) {
  if (runs.empty()) throw ConfigError("report: no runs found");
  fs::create_directories(out_dir);

  // Group by agent in a fixed order.
  std::vector<Group> groups;
  for (const LoadedRun& r : runs) {
    const EvalConfig& e = r.config.run_settings().eval;
    if (groups.empty() || groups.back().agent != r.result.label) groups.push_back({r.result.label, e, {}});
    Group& g = groups.back();
    if (e.train_max != g.eval.train_max || e.extrap_max != g.eval.extrap_max || e.threshold != g.eval.threshold)
      throw ConfigError("report: runs of agent " + g.agent + " use different evaluation ranges");
    g.runs.push_back(r.result);
  }

  int width = 0;
  for (const Group& g : groups) width = std::max(width, g.eval.extrap_max);

  std::ostringstream acc, traj, fig2, fig3, summary;
  acc << "agent,seed,episode";
  for (int n = 1; n <= width; ++n) acc << ",acc_" << n;
  acc << '\n';
  traj << "agent,seed,included,N,crossing_episode\n";
  fig2 << "agent,N,range,best_checkpoint_mean,best_checkpoint_se,best_any_time_mean,best_any_time_se,runs\n";
  fig3 << "agent,N,included_runs,total_runs,crossing_mean,crossing_sd\n";
  nlohmann::ordered_json fits = nlohmann::ordered_json::object();

  summary << "runs: " << runs.size() << "\n";
  for (const Group& g : groups) {
    const EnsembleSummary s = ensemble_summary(g.runs, g.eval);
    for (const RunResult& r : g.runs)
      for (const CheckpointRecord& rec : r.records) {
        acc << g.agent << ',' << r.seed << ',' << rec.episode;
        for (int n = 1; n <= width; ++n) acc << ',' << (n <= rec.max_instruction() ? fmt("%.6f", rec.at(n)) : "");
        acc << '\n';
      }
    for (const RunResult& r : g.runs) {
      const ThresholdTable t = threshold_crossings(r.records, g.eval.threshold, g.eval.train_min, g.eval.train_max);
      const bool inc = std::find(s.included_seeds.begin(), s.included_seeds.end(), r.seed) != s.included_seeds.end();
      for (int n = g.eval.train_min; n <= g.eval.train_max; ++n)
        traj << g.agent << ',' << r.seed << ',' << (inc ? 1 : 0) << ',' << n << ','
             << (t.at(n) ? std::to_string(*t.at(n)) : std::string()) << '\n';
    }
    for (int n = 1; n <= g.eval.extrap_max; ++n) {
      const MeanSe& b = s.accuracy_at_best.at(n);
      fig2 << g.agent << ',' << n << ',' << (n <= g.eval.train_max ? "train" : "extrapolation") << ','
           << fmt("%.6f", b.mean) << ',' << fmt("%.6f", b.se) << ',';
      if (s.best_any_time.count(n))
        fig2 << fmt("%.6f", s.best_any_time.at(n).mean) << ',' << fmt("%.6f", s.best_any_time.at(n).se);
      else
        fig2 << ',';
      fig2 << ',' << b.n << '\n';
    }
    for (int n = g.eval.train_min; n <= g.eval.train_max; ++n) {
      fig3 << g.agent << ',' << n << ',' << s.included_runs << ',' << s.total_runs << ',';
      auto it = s.crossing_episode.find(n);
      if (it != s.crossing_episode.end() && it->second.n > 0)
        fig3 << fmt("%.3f", it->second.mean) << ',' << fmt("%.3f", it->second.sd);
      else
        fig3 << ',';
      fig3 << '\n';
    }

    nlohmann::ordered_json gj;
    gj["included_runs"] = s.included_runs;
    gj["total_runs"] = s.total_runs;
    gj["included_seeds"] = s.included_seeds;
    gj["sigmoid_preferred"] = s.sigmoid_preferred;
    if (s.inflection.n > 0) {
      gj["inflection_mean"] = s.inflection.mean;
      gj["inflection_sd"] = s.inflection.sd;
      gj["inflection_runs"] = s.inflection.n;
    }
    nlohmann::ordered_json per_run = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < s.fits.size(); ++i) {
      nlohmann::ordered_json rj;
      rj["seed"] = s.included_seeds[i];
      rj["best_family"] = to_string(best_fit(s.fits[i]).family);
      nlohmann::ordered_json fl = nlohmann::ordered_json::array();
      for (const FitResult& f : s.fits[i]) fl.push_back(fit_json(f));
      rj["fits"] = fl;
      per_run.push_back(rj);
    }
    gj["runs"] = per_run;
    fits[g.agent] = gj;

    summary << "\n== " << g.agent << " ==\n";
    summary << "runs reaching threshold for every training N: " << s.included_runs << "/" << s.total_runs << "\n";
    summary << "accuracy at the best-average checkpoint (mean +- se over " << s.total_runs << " runs):\n";
    for (int n = 1; n <= g.eval.extrap_max; ++n) {
      const MeanSe& b = s.accuracy_at_best.at(n);
      summary << "  N=" << n << (n > g.eval.train_max ? " (extrapolation)" : "") << ": " << fmt("%.3f", b.mean)
              << " +- " << fmt("%.3f", b.se);
      if (s.best_any_time.count(n)) summary << "   best any time " << fmt("%.3f", s.best_any_time.at(n).mean);
      summary << "\n";
    }
    std::vector<double> ex;
    for (const RunResult& r : g.runs) {
      const long sel = select_best_checkpoint(r.records, g.eval.train_min, g.eval.train_max);
      ex.push_back(extrapolation_report(r.records, sel, g.eval).extrapolation_mean());
    }
    const MeanSe exm = mean_se(ex);
    summary << "extrapolation mean over N=" << g.eval.extrap_min << ".." << g.eval.extrap_max << ": "
            << fmt("%.3f", exm.mean) << " +- " << fmt("%.3f", exm.se) << "\n";
    if (s.no_qualifying_models()) {
      summary << "trajectory: no qualifying models\n";
    } else {
      summary << "first crossing episode (mean +- sd over included runs):\n";
      for (const auto& [n, m] : s.crossing_episode)
        summary << "  N=" << n << ": " << fmt("%.1f", m.mean) << " +- " << fmt("%.1f", m.sd) << "\n";
      summary << "BIC prefers sigmoidal in " << s.sigmoid_preferred << "/" << s.included_runs << " included runs\n";
      if (s.inflection.n > 0)
        summary << "sigmoid inflection N0: " << fmt("%.3f", s.inflection.mean) << " +- " << fmt("%.3f", s.inflection.sd)
                << " (sd, " << s.inflection.n << " runs)\n";
    }

    spit(out_dir / ("fig2_" + g.agent + ".svg"), fig2_svg(g, s));
    spit(out_dir / ("fig3_" + g.agent + ".svg"), fig3_svg(g, s));
  }

  spit(out_dir / "accuracy.csv", acc.str());
  spit(out_dir / "trajectory.csv", traj.str());
  spit(out_dir / "fig2.csv", fig2.str());
  spit(out_dir / "fig3.csv", fig3.str());
  spit(out_dir / "fits.json", fits.dump(2) + "\n");
  spit(out_dir / "summary.txt", summary.str());
  return summary.str();
}

}  // namespace givenet
