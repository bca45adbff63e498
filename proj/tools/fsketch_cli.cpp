// Experiment front end: generate streams, run the low-rank pipeline and the
// uniform-sampling baseline, sweep budgets, solve sketched regressions, and
// emit CSV records.

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fsketch/densela.hpp"
#include "fsketch/eval.hpp"
#include "fsketch/lowrank.hpp"
#include "fsketch/regress.hpp"
#include "fsketch/streams.hpp"
#include "fsketch/transform.hpp"

namespace {

using namespace fsketch;

std::uint64_t env_seed_or(std::uint64_t fallback) {
  const char* s = std::getenv("FSKETCH_SEED");
  if (!s || !*s) return fallback;
  return std::strtoull(s, nullptr, 10);
}

std::string dataset_id(const std::string& path) {
  std::size_t slash = path.find_last_of('/');
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  std::size_t dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  return stem;
}

void append_csv(const std::string& path, const std::vector<std::string>& rows) {
  bool need_header = true;
  {
    std::ifstream probe(path);
    if (probe.good() && probe.peek() != std::ifstream::traits_type::eof())
      need_header = false;
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot open CSV output: " + path);
  if (need_header) out << eval::csv_header() << "\n";
  for (const std::string& r : rows) out << r << "\n";
}

struct LowRankCli {
  std::string stream_path;
  int k = 10;
  std::string f_name = "log1p";
  double budget = 0.0;  // fraction of the dense matrix bytes
  int gamma = 0;
  std::string variant = "qi";
  std::uint64_t seed = 1;
  int seeds = 1;
  bool exact_eval = false;
  bool no_exact_eval = false;
  std::string baseline = "auto";  // auto | off | <cols>
  std::string out_csv;
  bool oracle_mode = false;
  bool timing = false;
  int jobs = 1;
  int threads = 0;
  std::uint64_t exact_eval_limit = 4000;
};

lowrank::LowRankConfig make_config(const LowRankCli& cli,
                                   const streams::StreamMeta& meta,
                                   std::uint64_t seed) {
  lowrank::LowRankConfig cfg;
  cfg.k = cli.k;
  cfg.seed = seed;
  cfg.threads = cli.threads;
  cfg.oracle_mode = cli.oracle_mode;
  cfg.variant = cli.variant == "eta" ? lowrank::AdaptiveVariant::thresholded_eta
                                     : lowrank::AdaptiveVariant::experimental_qi;
  if (cli.variant != "eta" && cli.variant != "qi")
    throw ConfigError("variant must be qi or eta");
  if (cli.gamma > 0) {
    cfg.budget_gamma = cli.gamma;
    // sample sizes and the per-column structure budget share the knob
    cfg.sketch_bytes_target =
        static_cast<double>(cli.gamma) * 24.0 * static_cast<double>(meta.n_cols);
  } else if (cli.budget > 0.0) {
    double dense_bytes = static_cast<double>(meta.n_rows) *
                         static_cast<double>(meta.n_cols) * 8.0;
    cfg.sketch_bytes_target = cli.budget * dense_bytes;
  }
  return cfg;
}

int run_lowrank_cmd(const LowRankCli& cli) {
  auto t0 = std::chrono::steady_clock::now();
  streams::ReplayableStream stream = streams::ReplayableStream::from_file(cli.stream_path);
  const auto& meta = stream.meta();
  Transform f = Transform::parse(cli.f_name);

  bool exact = cli.exact_eval;
  if (exact && !cli.no_exact_eval && meta.n_cols > cli.exact_eval_limit)
    throw ConfigError(
        "exact evaluation needs a dense SVD; this stream is too large "
        "(pass --no-exact-eval to skip the oracle)");

  eval::DenseEval ref;
  if (exact) ref = eval::dense_eval(meta, stream.events(), f, cli.k, cli.threads);

  std::vector<std::string> rows;
  double ratio_sum = 0.0, base_sum = 0.0, space_sum = 0.0;
  int base_count = 0;

  std::vector<eval::EvalRecord> recs(cli.seeds);
  std::vector<std::string> errors(cli.seeds);
#pragma omp parallel for schedule(static, 1) num_threads(std::max(1, cli.jobs))
  for (int t = 0; t < cli.seeds; ++t) {
    try {
    auto seed_t0 = std::chrono::steady_clock::now();
    std::uint64_t run_seed = cli.seed + static_cast<std::uint64_t>(t);
    lowrank::LowRankConfig cfg = make_config(cli, meta, run_seed);
    lowrank::LowRankResult res = lowrank_run(stream, cfg, f);

    eval::EvalRecord rec;
    rec.dataset = dataset_id(cli.stream_path);
    rec.n = meta.n_cols;
    rec.k = cli.k;
    rec.budget = cli.budget;
    rec.gamma = cli.gamma;
    rec.variant = cli.variant;
    rec.seed = std::to_string(run_seed);
    double dense_bytes = static_cast<double>(meta.n_rows) *
                         static_cast<double>(meta.n_cols) * 8.0;
    rec.space_ratio = static_cast<double>(res.peak_sketch_bytes) / dense_bytes;
    if (exact) rec.error_ratio = eval::error_ratio(ref, res.l);

    if (cli.baseline != "off" && exact) {
      int cols = 0;
      if (cli.baseline == "auto") {
        double bytes = res.peak_sketch_bytes > 0
                           ? static_cast<double>(res.peak_sketch_bytes)
                           : cfg.sketch_bytes_target;
        cols = static_cast<int>(bytes / (static_cast<double>(meta.n_rows) * 8.0));
      } else {
        cols = std::stoi(cli.baseline);
      }
      cols = std::max(cli.k, std::min<int>(cols, static_cast<int>(meta.n_cols)));
      Eigen::MatrixXd lb = eval::uniform_baseline(stream, f, cli.k, cols, run_seed);
      rec.baseline_error_ratio = eval::error_ratio(ref, lb);
    }
    if (cli.timing)
      rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - seed_t0)
                        .count();
    recs[t] = rec;
    } catch (const std::exception& e) {
      errors[t] = e.what();
    }
  }
  for (const std::string& err : errors)
    if (!err.empty()) throw PipelineError(err);

  for (const auto& rec : recs) {
    rows.push_back(eval::csv_row(rec));
    ratio_sum += rec.error_ratio;
    space_sum += rec.space_ratio;
    if (rec.baseline_error_ratio > 0) {
      base_sum += rec.baseline_error_ratio;
      ++base_count;
    }
  }

  if (cli.seeds > 1) {
    eval::EvalRecord avg = recs.front();
    avg.seed = "avg";
    avg.space_ratio = space_sum / cli.seeds;
    avg.error_ratio = ratio_sum / cli.seeds;
    avg.baseline_error_ratio = base_count ? base_sum / base_count : 0.0;
    avg.wall_ms = cli.timing
                      ? std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count()
                      : 0;
    rows.push_back(eval::csv_row(avg));
  }

  if (!cli.out_csv.empty())
    append_csv(cli.out_csv, rows);
  else
    for (const std::string& r : rows) std::cout << r << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming sketches for transformed matrices"};
  app.require_subcommand(1);

  // ---- generate ------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "write a synthetic update stream");
  std::string gen_kind = "logdata", gen_out = "stream.fsks", gen_text_path;
  std::string gen_variant = "expm1", fixture_kind = "vandermonde", alphas = "2,3,4,5,6,7";
  std::uint64_t gen_seed = 1;
  int gen_n = 1000, gen_window = 10, gen_vocab = 0, fp_scale = 40;
  std::string cooc_weighting = "inverse-distance", sidecar_path;
  gen->add_option("kind", gen_kind, "logdata | sqdata | cooc | fixture");
  gen->add_option("--n", gen_n);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out);
  gen->add_option("--fp-scale", fp_scale);
  gen->add_option("--variant", gen_variant, "expm1 | exp (logdata entry map)");
  gen->add_option("--text", gen_text_path, "input corpus for cooc");
  gen->add_option("--window", gen_window);
  gen->add_option("--vocab-n", gen_vocab);
  gen->add_option("--weighting", cooc_weighting, "unit | inverse-distance");
  gen->add_option("--sidecar", sidecar_path, "unigram counts output for cooc");
  gen->add_option("--fixture", fixture_kind, "vandermonde | block");
  gen->add_option("--alphas", alphas, "comma-separated Vandermonde nodes");

  // ---- lowrank --------------------------------------------------------------
  LowRankCli lr;
  auto* low = app.add_subcommand("lowrank", "run the low-rank pipeline");
  low->add_option("--stream", lr.stream_path)->required();
  low->add_option("--k", lr.k);
  low->add_option("--f", lr.f_name, "log1p | log1p^c | pow:p");
  low->add_option("--budget", lr.budget, "sketch bytes as a fraction of dense");
  low->add_option("--gamma", lr.gamma, "s = d1 = d2 = gamma and cell budget");
  low->add_option("--variant", lr.variant, "qi | eta");
  low->add_option("--seed", lr.seed);
  low->add_option("--seeds", lr.seeds, "number of seeded repetitions");
  low->add_flag("--exact-eval", lr.exact_eval);
  low->add_flag("--no-exact-eval", lr.no_exact_eval);
  low->add_option("--baseline", lr.baseline, "auto | off | <columns>");
  low->add_option("--out", lr.out_csv);
  low->add_flag("--oracle-mode", lr.oracle_mode);
  low->add_flag("--timing", lr.timing);
  low->add_option("--jobs", lr.jobs);
  low->add_option("--threads", lr.threads);

  // ---- baseline ------------------------------------------------------------
  std::string bl_stream, bl_out, bl_f = "log1p";
  int bl_k = 10, bl_cols = 0;
  std::uint64_t bl_seed = 1;
  auto* bl = app.add_subcommand("baseline", "uniform column-sampling baseline");
  bl->add_option("--stream", bl_stream)->required();
  bl->add_option("--k", bl_k);
  bl->add_option("--f", bl_f);
  bl->add_option("--num-cols", bl_cols)->required();
  bl->add_option("--seed", bl_seed);
  bl->add_option("--out", bl_out);

  // ---- sweep ---------------------------------------------------------------
  LowRankCli sw;
  std::string sw_gammas = "25,50,100,200";
  auto* sweep = app.add_subcommand("sweep", "sample-size sweep (s = d1 = d2)");
  sweep->add_option("--stream", sw.stream_path)->required();
  sweep->add_option("--k", sw.k);
  sweep->add_option("--f", sw.f_name);
  sweep->add_option("--gammas", sw_gammas);
  sweep->add_option("--variant", sw.variant);
  sweep->add_option("--seed", sw.seed);
  sweep->add_option("--seeds", sw.seeds);
  sweep->add_option("--out", sw.out_csv);
  sweep->add_flag("--timing", sw.timing);
  sweep->add_option("--jobs", sw.jobs);
  sweep->add_option("--threads", sw.threads);

  // ---- regress ---------------------------------------------------------------
  std::string rg_stream, rg_b, rg_out, rg_f = "log1p";
  int rg_d = 0, rg_s = 0;
  double rg_eps = 0.25;
  std::uint64_t rg_seed = 1;
  bool rg_exact = false;
  auto* rg = app.add_subcommand("regress", "sketch-and-solve linear regression");
  rg->add_option("--stream", rg_stream)->required();
  rg->add_option("--b", rg_b)->required();
  rg->add_option("--d", rg_d);
  rg->add_option("--epsilon", rg_eps);
  rg->add_option("--s", rg_s);
  rg->add_option("--seed", rg_seed);
  rg->add_flag("--exact-eval", rg_exact);
  rg->add_option("--out", rg_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      gen_seed = env_seed_or(gen_seed);
      if (gen_kind == "logdata" || gen_kind == "sqdata") {
        if (gen_n < 2) throw ConfigError("--n must be at least 2");
        streams::GenOptions opts;
        opts.fp_scale_log2 = static_cast<std::uint32_t>(fp_scale);
        opts.exp_minus_one = gen_variant != "exp";
        streams::Generated g = gen_kind == "logdata"
                                   ? streams::gen_logdata(gen_n, gen_seed, opts)
                                   : streams::gen_sqdata(gen_n, gen_seed, opts);
        streams::write_stream_file(gen_out, g.meta, g.events);
        std::cout << "wrote " << g.events.size() << " events to " << gen_out << "\n";
      } else if (gen_kind == "cooc") {
        if (gen_text_path.empty()) throw ConfigError("cooc requires --text");
        if (gen_vocab <= 0) throw ConfigError("cooc requires --vocab-n > 0");
        std::ifstream text(gen_text_path);
        if (!text) throw ConfigError("cannot open corpus: " + gen_text_path);
        streams::CoocOptions co;
        co.window = gen_window;
        co.vocab_n = gen_vocab;
        co.weighting = cooc_weighting == "unit" ? streams::CoocWeighting::unit
                                                : streams::CoocWeighting::inverse_distance;
        streams::CoocResult r = streams::ingest_cooccurrence(text, co);
        streams::write_stream_file(gen_out, r.meta, r.events);
        if (!sidecar_path.empty()) streams::write_cooc_sidecar(sidecar_path, r);
        std::cout << "wrote " << r.events.size() << " events, vocab "
                  << r.vocab.size() << "\n";
      } else if (gen_kind == "fixture") {
        Eigen::MatrixXd a, la_mat;
        if (fixture_kind == "vandermonde") {
          std::vector<double> nodes;
          std::stringstream ss(alphas);
          std::string tok;
          while (std::getline(ss, tok, ',')) nodes.push_back(std::stod(tok));
          if (static_cast<int>(nodes.size()) != gen_n)
            throw ConfigError("--alphas must list exactly n values");
          std::tie(a, la_mat) = streams::gen_vandermonde_fixture(gen_n, nodes);
        } else if (fixture_kind == "block") {
          std::tie(a, la_mat) = streams::gen_block_fixture(gen_n);
        } else {
          throw ConfigError("unknown fixture kind: " + fixture_kind);
        }
        streams::StreamMeta meta;
        meta.n_rows = a.rows();
        meta.n_cols = a.cols();
        meta.fp_scale_log2 = static_cast<std::uint32_t>(fp_scale);
        auto events = streams::stream_from_dense(a, meta.fp_scale_log2, 1, gen_seed);
        streams::write_stream_file(gen_out, meta, events);
        std::cout << "wrote fixture stream (" << events.size() << " events)\n";
      } else {
        throw ConfigError("unknown generate kind: " + gen_kind);
      }
      return 0;
    }

    if (low->parsed()) {
      lr.seed = env_seed_or(lr.seed);
      return run_lowrank_cmd(lr);
    }

    if (bl->parsed()) {
      bl_seed = env_seed_or(bl_seed);
      streams::ReplayableStream stream = streams::ReplayableStream::from_file(bl_stream);
      Transform f = Transform::parse(bl_f);
      eval::DenseEval ref =
          eval::dense_eval(stream.meta(), stream.events(), f, bl_k, 0);
      Eigen::MatrixXd lb = eval::uniform_baseline(stream, f, bl_k, bl_cols, bl_seed);
      eval::EvalRecord rec;
      rec.dataset = dataset_id(bl_stream);
      rec.n = stream.meta().n_cols;
      rec.k = bl_k;
      rec.variant = "uniform";
      rec.seed = std::to_string(bl_seed);
      rec.space_ratio = static_cast<double>(bl_cols) /
                        static_cast<double>(stream.meta().n_cols);
      rec.error_ratio = eval::error_ratio(ref, lb);
      std::vector<std::string> rows{eval::csv_row(rec)};
      if (!bl_out.empty())
        append_csv(bl_out, rows);
      else
        std::cout << rows.front() << "\n";
      return 0;
    }

    if (sweep->parsed()) {
      sw.seed = env_seed_or(sw.seed);
      std::vector<int> gammas;
      std::stringstream ss(sw_gammas);
      std::string tok;
      while (std::getline(ss, tok, ',')) gammas.push_back(std::stoi(tok));
      if (gammas.empty()) throw ConfigError("sweep requires at least one gamma");
      sw.exact_eval = true;
      sw.baseline = "off";
      for (int g : gammas) {
        LowRankCli one = sw;
        one.gamma = g;
        int rc = run_lowrank_cmd(one);
        if (rc != 0) return rc;
      }
      return 0;
    }

    if (rg->parsed()) {
      rg_seed = env_seed_or(rg_seed);
      streams::ReplayableStream stream = streams::ReplayableStream::from_file(rg_stream);
      const auto& meta = stream.meta();
      if (rg_d != 0 && rg_d != static_cast<int>(meta.n_cols))
        throw ConfigError("--d does not match the stream");
      Eigen::VectorXd b(meta.n_rows);
      {
        std::ifstream bf(rg_b);
        if (!bf) throw ConfigError("cannot open b vector: " + rg_b);
        for (Eigen::Index i = 0; i < b.size(); ++i)
          if (!(bf >> b(i))) throw ConfigError("b vector too short");
      }
      regress::RegressionConfig cfg;
      cfg.d = static_cast<int>(meta.n_cols);
      cfg.epsilon = rg_eps;
      cfg.s = rg_s;
      cfg.seed = rg_seed;
      Transform f = Transform::parse(rg_f);
      regress::RegressionResult res = regress::regress_solve(stream, b, cfg, f);

      std::ostringstream report;
      report << "x:";
      for (Eigen::Index i = 0; i < res.x.size(); ++i) {
        char num[32];
        std::snprintf(num, sizeof num, " %.9g", res.x(i));
        report << num;
      }
      report << "\n";
      if (rg_exact) {
        Eigen::MatrixXd a_design =
            streams::accumulate_dense(meta, stream.events(), 0)
                .unaryExpr([&f](double v) { return f(v); });
        double resid = (a_design * res.x - b).norm();
        Eigen::VectorXd x_opt =
            a_design.completeOrthogonalDecomposition().solve(b);
        double opt = (a_design * x_opt - b).norm();
        char line[160];
        std::snprintf(line, sizeof line,
                      "residual %.9g opt %.9g b_norm %.9g rank_deficient %d\n",
                      resid, opt, b.norm(), res.rank_deficient ? 1 : 0);
        report << line;
      }
      if (!rg_out.empty()) {
        std::ofstream out(rg_out, std::ios::trunc);
        out << report.str();
      } else {
        std::cout << report.str();
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const PipelineError& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
