#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ueq/cli/sha256.hpp"
#include "ueq/cli/traces.hpp"
#include "ueq/core/conditions.hpp"
#include "ueq/core/rng.hpp"
#include "ueq/meanfield/lab.hpp"
#include "ueq/rl/bandit.hpp"
#include "ueq/rl/cartpole.hpp"
#include "ueq/rl/mdp.hpp"
#include "ueq/twoplayer/lab.hpp"

namespace ueq::cli {

inline constexpr const char* kArtifactVersion = "ueq-manifest/1";

enum ExitCode { kOk = 0, kFailure = 1, kInvalidConfig = 2 };

namespace fs = std::filesystem;

/// Files written by one replicate, relative to the output directory.
using ReplicateRunner = std::function<std::vector<std::string>(std::uint64_t seed, const fs::path& dir,
                                                               const std::string& stem, std::ostream& log)>;

struct LabCommand {
  CLI::App* app = nullptr;
  std::string name;
  std::uint64_t seed = 0;
  int replicates = 1;
  std::string out = "out";
  std::string config;
  std::function<void()> validate = [] {};
  ReplicateRunner run;
};

inline void add_common(LabCommand& lab) {
  lab.app->add_option("--seed", lab.seed, "root seed; replicate i uses splitmix(seed, i)");
  lab.app->add_option("--replicates", lab.replicates, "number of replicates")->check(CLI::PositiveNumber);
  lab.app->add_option("--out", lab.out, "output directory")->configurable(false);
  lab.app->add_option("--config", lab.config, "flat key = value config file")->configurable(false);
}

/// Expands `--config FILE` into `--key value` arguments placed before the
/// remaining arguments, so command-line flags override the file. Sections
/// and unknown keys are rejected later by the strict parser.
[[nodiscard]] inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  for (std::size_t k = 0; k < args.size(); ++k) {
    std::string file;
    std::size_t span = 0;
    if (args[k] == "--config" && k + 1 < args.size()) {
      file = args[k + 1];
      span = 2;
    } else if (args[k].rfind("--config=", 0) == 0) {
      file = args[k].substr(9);
      span = 1;
    } else {
      continue;
    }
    const auto items = CLI::ConfigINI().from_file(file);
    std::vector<std::string> injected;
    for (const auto& item : items) {
      if (!item.parents.empty()) throw CLI::ConfigError("sections are not allowed in config files: " + item.fullname());
      if (item.inputs.empty()) throw CLI::ConfigError("config key needs a value: " + item.name);
      std::string value = item.inputs.front();
      for (std::size_t i = 1; i < item.inputs.size(); ++i) value += "," + item.inputs[i];
      injected.push_back("--" + item.name + "=" + value);
    }
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(k), args.begin() + static_cast<std::ptrdiff_t>(k + span));
    args.insert(args.begin() + 1, injected.begin(), injected.end());
    return args;
  }
  return args;
}

inline std::vector<std::string> write_trace_files(const fs::path& dir, const std::string& stem,
                                                  const std::function<void(std::ostream&)>& csv,
                                                  const std::function<void(std::ostream&)>& jsonl) {
  std::ofstream c(dir / (stem + ".csv")), j(dir / (stem + ".jsonl"));
  if (!c || !j) throw std::runtime_error("cannot write outputs under " + dir.string());
  csv(c);
  jsonl(j);
  return {stem + ".csv", stem + ".jsonl"};
}

inline void add_two_player(CLI::App& root, std::deque<LabCommand>& labs) {
  auto cfg = std::make_shared<twoplayer::GameConfig>();
  auto& lab = labs.emplace_back();
  lab.name = "two-player";
  lab.app = root.add_subcommand("two-player", "repeated two-player game with desperation-driven exploration");
  lab.app->add_option("--c", cfg->c, "action cost coefficient");
  lab.app->add_option("--b1", cfg->b1, "best expectation of player 1");
  lab.app->add_option("--b2", cfg->b2, "best expectation of player 2");
  lab.app->add_option("--k", cfg->k, "networks per ensemble");
  lab.app->add_option("--memory-len", cfg->memory_len, "memory length (0 disables learning)");
  lab.app->add_option("--recency-decay", cfg->recency_decay, "memory sampling decay");
  lab.app->add_option("--n-games", cfg->n_games, "rounds to play");
  lab.app->add_option("--grid", cfg->grid, "action grid size");
  add_common(lab);
  lab.validate = [cfg] { cfg->validate(); };
  lab.run = [cfg](std::uint64_t seed, const fs::path& dir, const std::string& stem, std::ostream& log) {
    auto c = *cfg;
    c.seed = seed;
    const auto tr = twoplayer::run_experiment(c);
    log << stem << ": crossings " << twoplayer::count_crossings(tr.rounds, 0.5) << ", tail (1,1) fraction "
        << twoplayer::tail_fraction_both_above(tr.rounds, 500, 0.9) << '\n';
    return write_trace_files(
        dir, stem, [&](std::ostream& os) { twoplayer::write_csv(os, tr); },
        [&](std::ostream& os) {
          write_jsonl(os, tr.stats[0], "action", "player-1");
          write_jsonl(os, tr.stats[1], "action", "player-2");
        });
  };
}

inline void add_mean_field(CLI::App& root, std::deque<LabCommand>& labs) {
  struct Params {
    int example = 1;
    double c = 0.3, a0 = 0.9;
    int iters = 500;
    std::string variant = "averaged";
  };
  auto p = std::make_shared<Params>();
  auto& lab = labs.emplace_back();
  lab.name = "mean-field";
  lab.app = root.add_subcommand("mean-field", "one-step mean-field game under naive mixing");
  lab.app->add_option("--example", p->example, "cost example")->check(CLI::IsMember({1, 2}));
  lab.app->add_option("--c", p->c, "mixing constant")->check(CLI::Range(0.0, 1.0));
  lab.app->add_option("--a0", p->a0, "prior action")->check(CLI::Range(0.0, 1.0));
  lab.app->add_option("--iters", p->iters, "iterations")->check(CLI::NonNegativeNumber);
  lab.app->add_option("--variant", p->variant, "cost variant")->check(CLI::IsMember({"averaged", "fictitious"}));
  add_common(lab);
  lab.run = [p](std::uint64_t seed, const fs::path& dir, const std::string& stem, std::ostream& log) {
    const auto game = p->example == 1 ? meanfield::example_one() : meanfield::example_two();
    const auto variant =
        p->variant == "averaged" ? meanfield::CostVariant::kAveraged : meanfield::CostVariant::kFictitious;
    const auto run = meanfield::run_mean_field(game, p->a0, p->c, p->iters, seed, variant);
    const auto [zeros, ones] = meanfield::tail_counts(run, 400);
    log << stem << ": last-400 best responses 0 x" << zeros << ", 1 x" << ones << '\n';
    return write_trace_files(
        dir, stem, [&](std::ostream& os) { meanfield::write_csv(os, run); },
        [&](std::ostream& os) { write_jsonl(os, run.stats, "action", "action"); });
  };
}

inline void add_cartpole(CLI::App& root, std::deque<LabCommand>& labs) {
  auto cfg = std::make_shared<rl::CartPoleConfig>();
  auto& lab = labs.emplace_back();
  lab.name = "cartpole";
  lab.app = root.add_subcommand("cartpole", "cart-pole with an ensemble of value networks");
  lab.app->add_option("--k-phi", cfg->k_phi, "value networks");
  lab.app->add_option("--episodes", cfg->episodes, "training episodes");
  lab.app->add_option("--t-horizon", cfg->horizon, "planning horizon");
  lab.app->add_option("--learning-rate", cfg->learning_rate, "SGD step size");
  lab.app->add_option("--value-scale", cfg->value_scale, "softmax temperature in value units");
  lab.app->add_option("--greedy", cfg->greedy, "take the best control instead of sampling");
  add_common(lab);
  lab.validate = [cfg] { cfg->validate(); };
  lab.run = [cfg](std::uint64_t seed, const fs::path& dir, const std::string& stem, std::ostream& log) {
    auto c = *cfg;
    c.seed = seed;
    const auto run = rl::run_cartpole(c);
    log << stem << ": best 100-episode average " << rl::max_moving_average(run.scores, 100) << '\n';
    return write_trace_files(
        dir, stem, [&](std::ostream& os) { rl::write_csv(os, run); },
        [&](std::ostream& os) { write_jsonl(os, run.stats, "first-action", "first-action"); });
  };
}

inline void add_mdp(CLI::App& root, std::deque<LabCommand>& labs) {
  struct Params {
    int states = 5, actions = 3;
    double discount = 0.9;
  };
  auto p = std::make_shared<Params>();
  auto& lab = labs.emplace_back();
  lab.name = "mdp";
  lab.app = root.add_subcommand("mdp", "random tabular MDP: greedy Q and Bellman residuals");
  lab.app->add_option("--states", p->states, "state count")->check(CLI::Range(1, 1000));
  lab.app->add_option("--actions", p->actions, "action count")->check(CLI::Range(1, 100));
  lab.app->add_option("--discount", p->discount, "discount factor")->check(CLI::Range(0.0, 0.999999));
  add_common(lab);
  lab.run = [p](std::uint64_t seed, const fs::path& dir, const std::string& stem, std::ostream& log) {
    Rng rng(seed);
    const auto m = rl::random_mdp(p->states, p->actions, p->discount, rng);
    const auto v = rl::value_iteration(m);
    const auto q = rl::q_value(m, rl::greedy_policy(m, rl::q_value(m, rl::uniform_policy(m))));
    auto pi = rl::greedy_policy(m, q);
    for (int round = 0; round < 100; ++round) {
      auto next = rl::greedy_policy(m, rl::q_value(m, pi));
      if (next == pi) break;
      pi = std::move(next);
    }
    const auto qg = rl::q_value(m, pi);
    log << stem << ": Q residual " << rl::q_residual(m, pi, qg) << ", Bellman residual " << rl::bellman_check(m, v)
        << '\n';
    return write_trace_files(
        dir, stem,
        [&](std::ostream& os) {
          os << "state,action,q,greedy\n";
          char buf[32];
          for (int x = 0; x < m.n_states; ++x) {
            for (int a = 0; a < m.n_actions; ++a) {
              std::snprintf(buf, sizeof buf, "%.17g", qg(x, a));
              os << x << ',' << a << ',' << buf << ',' << pi[static_cast<std::size_t>(x)].mass_at(a) << '\n';
            }
          }
        },
        [&](std::ostream& os) {
          for (int x = 0; x < m.n_states; ++x) {
            TrajectoryStats st;
            AgeRecord r;
            r.induced["action"] = pi[static_cast<std::size_t>(x)].pushforward([](int a) { return double(a); });
            st.push(std::move(r));
            write_jsonl(os, st, "action", "state-" + std::to_string(x));
          }
        });
  };
}

[[nodiscard]] inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("bad number in list: " + tok);
    out.push_back(v);
  }
  return out;
}

inline void add_bandit(CLI::App& root, std::deque<LabCommand>& labs) {
  struct Params {
    std::string arms = "0.5,0.6";
    double delta_f = 0.2;
    std::string perspective = "state";
    int scenarios = 100000;
    int ages = 100;
  };
  auto p = std::make_shared<Params>();
  auto& lab = labs.emplace_back();
  lab.name = "bandit";
  lab.app = root.add_subcommand("bandit", "Bernoulli bandit: induced arm distribution under noisy values");
  lab.app->add_option("--arms", p->arms, "comma-separated Bernoulli means");
  lab.app->add_option("--delta-f", p->delta_f, "half-width of the uniform value noise")
      ->check(CLI::NonNegativeNumber);
  lab.app->add_option("--perspective", p->perspective, "state | action")
      ->check(CLI::IsMember({"state", "action"}));
  lab.app->add_option("--scenarios", p->scenarios, "Monte Carlo draws for more than two arms")
      ->check(CLI::PositiveNumber);
  lab.app->add_option("--ages", p->ages, "ages recorded for the arms' own trajectories")
      ->check(CLI::PositiveNumber);
  add_common(lab);
  auto spec = [p] {
    rl::BanditSpec s;
    for (double m : parse_list(p->arms)) {
      if (!(m >= 0 && m <= 1)) throw std::invalid_argument("arm means must lie in [0,1]");
      s.arms.push_back(rl::bernoulli_arm(m));
    }
    s.delta_f = p->delta_f;
    s.perspective = rl::parse_perspective(p->perspective);
    s.validate();
    return s;
  };
  lab.validate = [spec] { (void)spec(); };
  lab.run = [p, spec](std::uint64_t seed, const fs::path& dir, const std::string& stem, std::ostream& log) {
    const auto s = spec();
    Rng rng(seed);
    const auto law = rl::bandit_policy(s, p->scenarios, rng);
    log << stem << ":";
    for (const auto& [a, w] : law.atoms()) log << " arm " << a << " " << w;
    log << '\n';
    return write_trace_files(
        dir, stem,
        [&](std::ostream& os) {
          os << "arm,probability\n";
          char buf[32];
          for (std::size_t a = 0; a < s.arms.size(); ++a) {
            std::snprintf(buf, sizeof buf, "%.17g", law.mass_at(static_cast<int>(a)));
            os << a << ',' << buf << '\n';
          }
        },
        [&](std::ostream& os) {
          TrajectoryStats st;
          AgeRecord r;
          r.induced["policy"] = law.pushforward([](int a) { return double(a); });
          st.push(std::move(r));
          write_jsonl(os, st, "policy", "policy");
          for (std::size_t a = 0; a < s.arms.size(); ++a) {
            write_jsonl(os, rl::arm_trajectory(s, static_cast<int>(a), p->ages), "action", "arm-" + std::to_string(a));
          }
        });
  };
}

/// Runs every replicate, writes outputs and manifest.json under `lab.out`.
inline int execute_lab(const LabCommand& lab, std::ostream& out) {
  const fs::path dir(lab.out);
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["artifact_version"] = kArtifactVersion;
  manifest["lab"] = lab.name;
  manifest["config"] = lab.app->config_to_str(true, false);
  manifest["root_seed"] = lab.seed;
  manifest["replicates"] = nlohmann::json::array();
  for (int i = 0; i < lab.replicates; ++i) {
    const auto seed = derive_seed(lab.seed, static_cast<std::uint64_t>(i));
    const auto stem = lab.name + "_r" + std::to_string(i);
    const auto files = lab.run(seed, dir, stem, out);
    nlohmann::json rec;
    rec["index"] = i;
    rec["seed"] = seed;
    for (const auto& f : files) rec["files"][f] = sha256_file(dir / f);
    manifest["replicates"].push_back(rec);
  }
  std::ofstream m(dir / "manifest.json");
  m << manifest.dump(2) << '\n';
  out << "wrote " << (dir / "manifest.json").string() << '\n';
  return kOk;
}

[[nodiscard]] inline FiniteMeasure<double> parse_reference(const std::string& s) {
  FiniteMeasure<double> m;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("reference atoms are point:weight pairs");
    m.add(std::stod(tok.substr(0, colon)), std::stod(tok.substr(colon + 1)));
  }
  if (!m.is_probability()) throw std::invalid_argument("reference weights must sum to 1");
  return m;
}

struct CheckOptions {
  std::vector<std::string> traces;
  double epsilon = 0, r = 0, delta = 0;
  double kappa_threshold = std::numeric_limits<double>::quiet_NaN();
  std::string site;
  std::string reference;
  std::string metric = "tv";
  std::size_t window = 0;
};

struct SiteReport {
  std::string site;
  double epsilon = 0;        ///< worst tail regret
  double r = 0;              ///< worst tail distance to the reference
  double delta = 0;          ///< share of replicates whose tail distance exceeds r
  double kappa_min = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
};

/// Regret, recurrence and kappa checks per site across the replicate traces.
[[nodiscard]] inline std::vector<SiteReport> check_equilibrium(const CheckOptions& opt) {
  std::map<std::string, std::vector<TrajectoryStats>> by_site;
  for (const auto& path : opt.traces) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read trace " + path);
    for (auto& [site, st] : read_jsonl(in)) {
      if (opt.site.empty() || site == opt.site) by_site[site].push_back(std::move(st));
    }
  }
  if (by_site.empty()) throw std::runtime_error("no trajectories to check");
  const auto metric = parse_metric(opt.metric);
  std::vector<SiteReport> out;
  for (const auto& [site, runs] : by_site) {
    SiteReport rep;
    rep.site = site;
    int misses = 0;
    for (const auto& st : runs) {
      const std::size_t w = opt.window > 0 ? std::min(opt.window, st.size()) : default_window(st.size());
      const auto ref = opt.reference.empty() ? st.per_age().front().induced.at(site) : parse_reference(opt.reference);
      const auto rec = recurrence_check(st, site, ref, metric, w, opt.r);
      rep.r = std::max(rep.r, rec.min_distance_tail);
      if (rec.min_distance_tail > opt.r + 1e-12) ++misses;
      const auto& ages = st.per_age();
      for (std::size_t n = ages.size() - w; n < ages.size(); ++n) {
        rep.epsilon = std::max(rep.epsilon, ages[n].regret);
        if (!std::isnan(ages[n].kappa)) {
          rep.kappa_min = std::isnan(rep.kappa_min) ? ages[n].kappa : std::min(rep.kappa_min, ages[n].kappa);
        }
      }
    }
    rep.delta = static_cast<double>(misses) / static_cast<double>(runs.size());
    const bool kappa_ok =
        std::isnan(opt.kappa_threshold) || std::isnan(rep.kappa_min) || rep.kappa_min > opt.kappa_threshold;
    rep.pass = rep.epsilon <= opt.epsilon + 1e-12 && rep.delta <= opt.delta + 1e-12 && kappa_ok;
    out.push_back(rep);
  }
  return out;
}

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

/// Re-runs a manifest's config into `dir` and compares every checksum.
inline int replay_manifest(const std::string& manifest_path, std::string dir, std::ostream& out, std::ostream& err) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read manifest " + manifest_path);
  const auto m = nlohmann::json::parse(in);
  if (m.at("artifact_version") != kArtifactVersion) throw std::runtime_error("unsupported manifest version");
  if (dir.empty()) dir = (fs::path(manifest_path).parent_path() / "replay").string();
  fs::create_directories(dir);
  const auto cfg = (fs::path(dir) / "replay.cfg").string();
  std::ofstream(cfg) << m.at("config").get<std::string>();
  std::ostringstream log;
  const int code = run_cli({m.at("lab").get<std::string>(), "--config", cfg, "--out", dir}, log, err);
  if (code != kOk) return code;
  std::ifstream again((fs::path(dir) / "manifest.json").string());
  const auto r = nlohmann::json::parse(again);
  int mismatches = 0;
  const auto& a = m.at("replicates");
  const auto& b = r.at("replicates");
  if (a.size() != b.size()) ++mismatches;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i].at("seed") != b[i].at("seed")) ++mismatches;
    for (const auto& [name, sum] : a[i].at("files").items()) {
      const bool same = b[i].at("files").contains(name) && b[i].at("files").at(name) == sum;
      out << (same ? "match    " : "MISMATCH ") << name << '\n';
      if (!same) ++mismatches;
    }
  }
  out << (mismatches == 0 ? "replay identical" : "replay differs") << '\n';
  return mismatches == 0 ? kOk : kFailure;
}

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Uncertain-equilibrium learning labs"};
  app.name("ueq");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);
  std::deque<LabCommand> labs;  // options bind to members, so addresses must stay put
  add_two_player(app, labs);
  add_mean_field(app, labs);
  add_cartpole(app, labs);
  add_mdp(app, labs);
  add_bandit(app, labs);

  CheckOptions check;
  auto* chk = app.add_subcommand("check-equilibrium", "evaluate equilibrium conditions on JSONL traces");
  chk->add_option("traces", check.traces, "trace files")->required()->check(CLI::ExistingFile);
  chk->add_option("--epsilon", check.epsilon, "regret tolerance");
  chk->add_option("--r", check.r, "recurrence radius");
  chk->add_option("--delta", check.delta, "allowed share of non-recurrent replicates");
  chk->add_option("--kappa-threshold", check.kappa_threshold, "required lower bound on kappa");
  chk->add_option("--site", check.site, "only check this site");
  chk->add_option("--reference", check.reference, "reference law as point:weight,...; default: first age");
  chk->add_option("--metric", check.metric, "tv | w1")->check(CLI::IsMember({"tv", "w1"}));
  chk->add_option("--window", check.window, "tail window (0: default)");

  std::string manifest, replay_dir;
  auto* rep = app.add_subcommand("manifest-replay", "re-run a manifest and compare checksums");
  rep->add_option("manifest", manifest, "manifest.json")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", replay_dir, "replay directory (default: <manifest dir>/replay)");

  try {
    args = expand_config(std::move(args));
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "invalid config: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "invalid config: " << e.what() << '\n';
    return kInvalidConfig;
  }

  try {
    for (auto& lab : labs) {
      if (!lab.app->parsed()) continue;
      try {
        lab.validate();
      } catch (const std::invalid_argument& e) {
        err << "invalid config: " << e.what() << '\n';
        return kInvalidConfig;
      }
      return execute_lab(lab, out);
    }
    if (chk->parsed()) {
      bool all = true;
      for (const auto& r : check_equilibrium(check)) {
        out << r.site << ": epsilon " << r.epsilon << " r " << r.r << " delta " << r.delta << " kappa-min "
            << r.kappa_min << (r.pass ? " PASS" : " FAIL") << '\n';
        all = all && r.pass;
      }
      return all ? kOk : kFailure;
    }
    if (rep->parsed()) return replay_manifest(manifest, replay_dir, out, err);
  } catch (const std::invalid_argument& e) {
    err << "invalid config: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace ueq::cli
