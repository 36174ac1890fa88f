#include "nestcov/cli.hpp"

#include <charconv>
#include <cstdlib>

#include "nestcov/estimators.hpp"
#include "nestcov/io.hpp"

namespace nestcov {

std::string_view to_string(Command command) noexcept {
  switch (command) {
    case Command::SimulateDiag: return "simulate-diag";
    case Command::SimulateGmrf: return "simulate-gmrf";
    case Command::CompareShrinkage: return "compare-shrinkage";
    case Command::FisherTrace: return "fisher-trace";
    case Command::Estimate: return "estimate";
  }
  return "unknown";
}

std::optional<Command> parse_command(std::string_view text) noexcept {
  for (auto c : {Command::SimulateDiag, Command::SimulateGmrf, Command::CompareShrinkage,
                 Command::FisherTrace, Command::Estimate})
    if (text == to_string(c)) return c;
  return std::nullopt;
}

unsigned threads_from_env() {
  const char* value = std::getenv("NESTCOV_THREADS");
  if (!value) return 0;
  unsigned n = 0;
  const std::string_view text(value);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), n);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return 0;
  return n;
}

namespace {

std::string join_params(const Vector& p) {
  std::string out;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (i) out += ";";
    out += format_double(p[i]);
  }
  return out;
}

std::string fit_row(const std::string& model, int N, const auto& fit) {
  try {
    const FitReport r = fit();
    return model + "," + std::to_string(N) + ",ok," + std::to_string(r.iterations) + "," +
           format_double(r.residual_norm) + "," + join_params(r.params) + "\n";
  } catch (const Error& e) {
    return model + "," + std::to_string(N) + "," + std::string(to_string(e.kind())) + ",0,nan,\n";
  }
}

void require_kind(const ExperimentConfig& config, Command command,
                  std::initializer_list<ExperimentKind> kinds) {
  for (auto k : kinds)
    if (config.kind == k) return;
  fail(ErrorKind::ValidationError, "command " + std::string(to_string(command)) +
                                       " cannot run a " + std::string(to_string(config.kind)) +
                                       " configuration");
}

}  // namespace

std::string estimate_report(const ExperimentConfig& config) {
  validate(config);
  std::string out = "model,N,status,iterations,residual_norm,params\n";
  if (config.kind == ExperimentKind::Gmrf) {
    const GmrfStructure n4 = gmrf_structure(config.rows, config.cols, NeighborLevel::N4);
    const Vector theta = Eigen::Map<const Vector>(config.truth.data(), 3);
    Matrix sigma = precision_assemble(n4, theta).values().llt().solve(
        Matrix::Identity(n4.dim(), n4.dim()));
    const SpdMatrix cov = SpdMatrix::certified(0.5 * (sigma + sigma.transpose()));
    for (int N : config.sample_sizes) {
      const Matrix s = sample_covariance(gaussian_sample(cov, N, replication_seed(config.seed, N, 0)));
      for (auto level : {NeighborLevel::N4, NeighborLevel::N8, NeighborLevel::N12}) {
        const GmrfStructure st = gmrf_structure(config.rows, config.cols, level);
        std::string name = "gmrf_" + std::string(to_string(level));
        for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        out += fit_row(name, N, [&] { return fit_gmrf(s, st); });
      }
    }
    return out;
  }
  const DecayModel truth = decay_truth(config);
  const SpdMatrix cov = SpdMatrix::certified(decay_diagonal(truth).dense());
  for (int N : config.sample_sizes) {
    const SufficientStats stats =
        sufficient_stats(gaussian_sample(cov, N, replication_seed(config.seed, N, 0)));
    out += fit_row("decay2", N, [&] { return fit_decay2(stats, truth.spectrum()); });
    out += fit_row("decay3", N, [&] { return fit_decay3(stats, truth.spectrum()); });
  }
  return out;
}

std::vector<std::filesystem::path> run_command(const CliConfig& cli) {
  ExperimentConfig config = parse_config(cli.config_path);
  if (cli.seed_override) config.seed = *cli.seed_override;

  std::error_code ec;
  std::filesystem::create_directories(cli.output_dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create output directory " + cli.output_dir.string());

  const std::string stem(to_string(cli.command));
  const auto csv_path = cli.output_dir / (stem + ".csv");
  const auto svg_path = cli.output_dir / (stem + ".svg");
  std::vector<std::filesystem::path> written;
  const RunOptions options{cli.threads};

  switch (cli.command) {
    case Command::SimulateDiag:
    case Command::SimulateGmrf:
    case Command::CompareShrinkage: {
      const ExperimentKind want = cli.command == Command::SimulateDiag ? ExperimentKind::DiagDecay
                                  : cli.command == Command::SimulateGmrf
                                      ? ExperimentKind::Gmrf
                                      : ExperimentKind::ShrinkCompare;
      require_kind(config, cli.command, {want});
      const ExperimentTable table = run_experiment(config, options);
      emit_csv(table, csv_path);
      written.push_back(csv_path);
      if (cli.svg) {
        emit_svg_plot(table, svg_path);
        written.push_back(svg_path);
      }
      break;
    }
    case Command::FisherTrace: {
      require_kind(config, cli.command, {ExperimentKind::DiagDecay, ExperimentKind::ShrinkCompare});
      const std::vector<TraceRow> rows = fisher_trace_report(config);
      write_file(csv_path, format_trace_csv(rows));
      written.push_back(csv_path);
      if (cli.svg) {
        ExperimentTable as_table;
        for (const auto& r : rows) as_table.rows.push_back({r.model, r.N, r.value, 0.0, 0, 0});
        emit_svg_plot(as_table, svg_path, "(1/N) Tr Q");
        written.push_back(svg_path);
      }
      break;
    }
    case Command::Estimate:
      write_file(csv_path, estimate_report(config));
      written.push_back(csv_path);
      break;
  }
  return written;
}

}  // namespace nestcov
