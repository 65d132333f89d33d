// decegy: video decoding energy estimation from bitstream features.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "decegy/dataset.hpp"
#include "decegy/error.hpp"
#include "decegy/evaluation.hpp"
#include "decegy/fitting.hpp"
#include "decegy/report.hpp"
#include "decegy/trace.hpp"

namespace {

using namespace decegy;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Codec require_codec(const std::string& text) {
  auto c = parse_codec(text);
  if (!c) throw UsageError("unknown codec '" + text + "' (expected h263, h264, hevc or vp9)");
  return *c;
}

ModelKind require_model(const std::string& text) {
  auto m = parse_model_kind(text);
  if (!m) throw UsageError("unknown model '" + text + "' (expected feature, hl1 or hl2)");
  return *m;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << content;
  if (!out) throw DataError(path.string() + ": write failed");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

ModelParams read_params(const std::filesystem::path& path) {
  try {
    return model_params_from_json(read_json(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

// --- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<std::string> traces;
  std::string codec;
  std::string out;
};

int cmd_analyze(const AnalyzeArgs& a) {
  TraceDefaults defaults;
  if (!a.codec.empty()) defaults.codec = require_codec(a.codec);

  Dataset ds;
  bool first = true;
  for (const auto& path : a.traces) {
    const auto trace = parse_trace_file(path, defaults);
    if (first) {
      ds.codec = trace.codec();
      first = false;
    } else if (trace.codec() != ds.codec) {
      throw DataError(path + ": mixed codecs (" + std::string(to_string(trace.codec())) + " after " +
                      std::string(to_string(ds.codec)) + ")");
    }
    if (ds.find(trace.stream_id())) throw DataError(path + ": duplicate stream_id '" + trace.stream_id() + "'");
    BitstreamRecord r;
    r.stream_id = trace.stream_id();
    r.features = analyze(trace);
    r.width = trace.header.width;
    r.height = trace.header.height;
    r.frames = count_frames(trace);
    r.file_size_bytes = trace.header.file_size_bytes;
    r.intra_frames = count_intra_frames(trace);
    ds.records.push_back(std::move(r));
  }
  std::ostringstream csv;
  write_dataset_csv(csv, ds);
  write_file(a.out, csv.str());
  std::cout << "analyzed " << ds.size() << " trace(s) for " << to_string(ds.codec) << " -> " << a.out << '\n';
  return kOk;
}

// --- fit -------------------------------------------------------------------

struct FitArgs {
  std::string dataset;
  std::string model = "feature";
  bool nonneg = false;
  std::string out;
};

int cmd_fit(const FitArgs& a) {
  const auto kind = require_model(a.model);
  const auto ds = load_dataset(a.dataset);
  FitOptions opts;
  opts.nonneg = a.nonneg;
  const auto trained = train_model(ds, kind, opts);

  auto doc = to_json(trained.params);
  doc["diagnostics"] = to_json(trained.diagnostics);
  doc["records"] = ds.size();
  write_file(a.out, doc.dump(2) + "\n");

  std::vector<double> est, meas;
  for (const auto& r : ds.records) {
    est.push_back(predict(trained.params, r));
    meas.push_back(r.energy());
  }
  std::cout << "fitted " << to_string(kind) << " model on " << ds.size() << " " << to_string(ds.codec)
            << " streams (" << trained.diagnostics.method << ", " << trained.diagnostics.termination << ")\n"
            << "training mean relative error: " << percent(mean_relative_error(est, meas)) << '\n';
  if (!trained.diagnostics.clamped_columns.empty()) {
    std::cout << "clamped at 0:";
    for (const auto& c : trained.diagnostics.clamped_columns) std::cout << ' ' << c;
    std::cout << "\nKKT violation (scaled): " << trained.diagnostics.kkt_violation << '\n';
  }
  for (const auto& w : trained.diagnostics.warnings) std::cout << "warning: " << w << '\n';
  std::cout << "parameters -> " << a.out << '\n';
  return kOk;
}

// --- predict ---------------------------------------------------------------

struct PredictArgs {
  std::string dataset;
  std::string params;
  std::string out;
};

int cmd_predict(const PredictArgs& a) {
  const auto params = read_params(a.params);
  auto ds = load_dataset(a.dataset, LoadOptions{false});
  if (params.codec != ds.codec)
    throw DataError("parameters are for " + std::string(to_string(params.codec)) + " but the dataset is " +
                    std::string(to_string(ds.codec)));
  for (auto& r : ds.records) {
    const std::string value = format_number(predict(params, r));
    auto it = std::find_if(r.tags.begin(), r.tags.end(), [](const auto& kv) { return kv.first == "E_hat"; });
    if (it == r.tags.end()) {
      r.tags.emplace_back("E_hat", value);
    } else {
      it->second = value;
    }
  }
  std::ostringstream csv;
  write_dataset_csv(csv, ds);
  write_file(a.out, csv.str());
  std::cout << "predicted " << ds.size() << " streams with the " << to_string(params.kind()) << " model -> "
            << a.out << '\n';
  return kOk;
}

// --- crossval --------------------------------------------------------------

struct CrossvalArgs {
  std::string dataset;
  std::vector<std::string> models{"feature"};
  std::size_t k = 10;
  std::uint64_t seed = 42;
  bool nonneg = false;
  std::string out;
};

int cmd_crossval(const CrossvalArgs& a) {
  const auto ds = load_dataset(a.dataset);
  if (a.k < 2 || a.k > ds.size())
    throw UsageError("--k must be between 2 and the number of records (" + std::to_string(ds.size()) + ")");
  FitOptions opts;
  opts.nonneg = a.nonneg;

  nlohmann::json reports = nlohmann::json::array();
  std::cout << a.k << "-fold cross-validation, " << ds.size() << " " << to_string(ds.codec)
            << " streams, seed " << a.seed << "\n\n";
  std::printf("%-10s %12s %14s %8s\n", "model", "eps_bar", "fold-mean", "failed");
  std::fflush(stdout);
  for (const auto& m : a.models) {
    const auto report = cross_validate(ds, require_model(m), a.k, a.seed, opts);
    std::printf("%-10s %12s %14s %8zu\n", m.c_str(), percent(report.mean_relative_error).c_str(),
                percent(report.mean_of_fold_means).c_str(), report.failed_folds);
    std::fflush(stdout);
    reports.push_back(to_json(report));
  }
  if (!a.out.empty()) {
    nlohmann::json doc{{"dataset", a.dataset}, {"reports", std::move(reports)}};
    write_file(a.out, doc.dump(2) + "\n");
    std::cout << "\nreport -> " << a.out << '\n';
  }
  return kOk;
}

// --- report ----------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> datasets;
  std::vector<std::string> params;
  std::vector<std::string> streams;
  std::string out;
  std::string svg;
};

int cmd_report(const ReportArgs& a) {
  std::map<Codec, SpecificEnergies> energies;
  for (const auto& p : a.params) {
    auto mp = read_params(p);
    const auto* e = std::get_if<SpecificEnergies>(&mp.params);
    if (!e) throw DataError(p + ": the breakdown needs feature-model parameters");
    if (energies.count(mp.codec)) throw UsageError("two parameter files for " + std::string(to_string(mp.codec)));
    energies.emplace(mp.codec, *e);
  }
  std::vector<Dataset> datasets;
  for (const auto& d : a.datasets) datasets.push_back(load_dataset(d, LoadOptions{false}));

  auto energies_for = [&](Codec c) -> const SpecificEnergies& {
    auto it = energies.find(c);
    if (it == energies.end()) throw DataError("no parameter file for " + std::string(to_string(c)) + " streams");
    return it->second;
  };

  std::vector<BreakdownRow> rows;
  if (a.streams.empty()) {
    for (const auto& ds : datasets) {
      auto part = breakdown_report(ds.records, energies_for(ds.codec));
      rows.insert(rows.end(), part.begin(), part.end());
    }
  } else {
    for (const auto& id : a.streams) {
      const BitstreamRecord* rec = nullptr;
      for (const auto& ds : datasets)
        if ((rec = ds.find(id))) break;
      if (!rec) throw DataError("unknown stream id '" + id + "'");
      auto part = breakdown_report(std::span(rec, 1), energies_for(rec->codec()));
      rows.push_back(std::move(part.front()));
    }
  }

  std::ostringstream csv;
  write_breakdown_csv(csv, rows);
  if (!a.out.empty()) write_file(a.out, csv.str());
  if (!a.svg.empty()) {
    std::ostringstream svg;
    write_breakdown_svg(svg, rows);
    write_file(a.svg, svg.str());
  }
  std::printf("%-24s %10s %10s", "stream", "E_dec[J]", "E_hat[J]");
  for (Category c : kAllCategories) std::printf(" %9s", std::string(to_string(c)).c_str());
  std::printf("\n");
  for (const auto& r : rows) {
    std::printf("%-24s %10s %10.4f", r.stream_id.c_str(),
                r.measured ? format_number(std::round(*r.measured * 1e4) / 1e4).c_str() : "-", r.estimated);
    for (double v : r.categories) std::printf(" %9.4f", v);
    std::printf("\n");
  }
  std::fflush(stdout);
  return kOk;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string codec = "hevc";
  std::size_t count = 200;
  double sigma = 0.0;
  std::uint64_t seed = 42;
  std::string out;
  std::string params_out;
};

int cmd_synth(const SynthArgs& a) {
  const auto spec = default_synth_spec(require_codec(a.codec), a.count, a.sigma, a.seed);
  const auto ds = synth_dataset(spec);
  export_dataset(ds, a.out);
  if (!a.params_out.empty()) {
    const ModelParams truth{spec.codec, spec.true_params};
    write_file(a.params_out, to_json(truth).dump(2) + "\n");
  }
  std::cout << "synthesized " << ds.size() << " " << to_string(ds.codec) << " streams (sigma " << a.sigma
            << ", seed " << a.seed << ") -> " << a.out << '\n';
  return kOk;
}

// --- features --------------------------------------------------------------

int cmd_features(const std::string& codec) {
  std::cout << to_json(feature_set(require_codec(codec))).dump() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video decoding energy estimation from bitstream features"};
  app.require_subcommand(1);

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "Count bitstream features in decode traces");
  analyze_cmd->add_option("traces", analyze_args.traces, "Trace files (JSON Lines)")->required();
  analyze_cmd->add_option("--codec", analyze_args.codec, "Codec of the traces (h263|h264|hevc|vp9)");
  analyze_cmd->add_option("--out", analyze_args.out, "Feature CSV to write")->required();

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Train model parameters on a dataset");
  fit_cmd->add_option("--dataset", fit_args.dataset, "Dataset (.csv or .json)")->required();
  fit_cmd->add_option("--model", fit_args.model, "feature|hl1|hl2")->capture_default_str();
  fit_cmd->add_flag("--nonneg", fit_args.nonneg, "Constrain specific energies to be non-negative");
  fit_cmd->add_option("--out", fit_args.out, "Parameter file to write (JSON)")->required();

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Append energy estimates (E_hat) to a dataset");
  predict_cmd->add_option("--dataset", predict_args.dataset, "Dataset (.csv or .json)")->required();
  predict_cmd->add_option("--params", predict_args.params, "Parameter file from 'fit'")->required();
  predict_cmd->add_option("--out", predict_args.out, "CSV to write")->required();

  CrossvalArgs cv_args;
  auto* cv_cmd = app.add_subcommand("crossval", "k-fold cross-validation of one or more models");
  cv_cmd->add_option("--dataset", cv_args.dataset, "Dataset (.csv or .json)")->required();
  cv_cmd->add_option("--model", cv_args.models, "feature|hl1|hl2 (repeatable)")->capture_default_str();
  cv_cmd->add_option("--k", cv_args.k, "Number of folds")->capture_default_str();
  cv_cmd->add_option("--seed", cv_args.seed, "Fold partition seed")->capture_default_str();
  cv_cmd->add_flag("--nonneg", cv_args.nonneg, "Non-negative specific energies");
  cv_cmd->add_option("--out", cv_args.out, "Report to write (JSON)");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Per-category energy breakdown (CSV/SVG)");
  report_cmd->add_option("--dataset", report_args.datasets, "Dataset(s), one per codec")->required();
  report_cmd->add_option("--params", report_args.params, "Feature-model parameter file(s)")->required();
  report_cmd->add_option("--streams", report_args.streams, "Stream ids (default: all)")->delimiter(',');
  report_cmd->add_option("--out", report_args.out, "Breakdown CSV to write");
  report_cmd->add_option("--svg", report_args.svg, "Stacked-bar SVG to write");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset from the feature model");
  synth_cmd->add_option("--codec", synth_args.codec, "h263|h264|hevc|vp9")->capture_default_str();
  synth_cmd->add_option("--count", synth_args.count, "Number of streams")->capture_default_str();
  synth_cmd->add_option("--sigma", synth_args.sigma, "Multiplicative Gaussian noise sigma")->capture_default_str();
  synth_cmd->add_option("--seed", synth_args.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_args.out, "Dataset to write (.csv or .json)")->required();
  synth_cmd->add_option("--params-out", synth_args.params_out, "Write the generating parameters here");

  std::string features_codec;
  auto* features_cmd = app.add_subcommand("features", "Print a codec's feature set as JSON");
  features_cmd->add_option("codec", features_codec, "h263|h264|hevc|vp9")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*analyze_cmd) return cmd_analyze(analyze_args);
    if (*fit_cmd) return cmd_fit(fit_args);
    if (*predict_cmd) return cmd_predict(predict_args);
    if (*cv_cmd) return cmd_crossval(cv_args);
    if (*report_cmd) return cmd_report(report_args);
    if (*synth_cmd) return cmd_synth(synth_args);
    if (*features_cmd) return cmd_features(features_codec);
  } catch (const UsageError& e) {
    std::cerr << "decegy: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "decegy: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "decegy: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "decegy: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
