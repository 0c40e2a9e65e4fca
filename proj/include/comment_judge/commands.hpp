#pragma once

// Subcommands of the comment-judge command line tool. run_cli() is the whole
// program; tools/comment_judge.cpp only forwards argv to it.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "comment_judge/augment.hpp"
#include "comment_judge/chat_client.hpp"
#include "comment_judge/corpus.hpp"
#include "comment_judge/dataset_io.hpp"
#include "comment_judge/error.hpp"
#include "comment_judge/eval.hpp"
#include "comment_judge/extract.hpp"
#include "comment_judge/kappa.hpp"
#include "comment_judge/model_io.hpp"
#include "comment_judge/pipeline.hpp"

namespace comment_judge::cli {

namespace fs = std::filesystem;

inline constexpr const char* kResolvedConfigName = "resolved_config.txt";

// ---------------------------------------------------------------------------
// Config file: key = value lines, '#' comments. Keys are long flag names.

inline std::string config_key(std::string_view k) {
  auto t = std::string(text::trim(k));
  while (!t.empty() && t.front() == '-') t.erase(t.begin());
  std::replace(t.begin(), t.end(), '_', '-');
  return text::to_lower(t);
}

inline std::map<std::string, std::string> parse_config_file(std::string_view content) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    auto line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = config_key(line.substr(0, eq));
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    if (key == "api-key" || key == "apikey" || key == "token") {
      throw UsageError(std::string("credentials are never read from config files; set ") + kApiKeyEnv);
    }
    out[key] = std::string(text::trim(line.substr(eq + 1)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared options

struct GlobalOptions {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string format;
  std::string endpoint;
  std::string endpoint_model = "default";
  std::size_t max_in_flight = 4;
  std::size_t pairs_per_request = 5;
  int max_retries = 3;
  double timeout_seconds = 30.0;
};

struct HyperParams {
  double lambda = 1e-4;
  std::size_t svm_epochs = 100;
  double initial_rate = 0.01;
  bool balance_classes = true;
  int degree = 3;
  double coef0 = 1.0;
  std::vector<std::size_t> hidden{64};
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t ann_epochs = 100;
  std::size_t batch_size = 32;
  std::size_t min_df = 2;
  std::size_t max_vocabulary = 50'000;
};

inline void add_hyperparams(CLI::App* sub, HyperParams& h) {
  sub->add_option("--lambda", h.lambda, "SVM regularization strength")->check(CLI::PositiveNumber);
  sub->add_option("--svm-epochs", h.svm_epochs, "SVM passes over the training data")->check(CLI::PositiveNumber);
  sub->add_option("--initial-rate", h.initial_rate, "approximate first SVM step size (<= 0: plain 1/(lambda t))");
  sub->add_option("--balance-classes", h.balance_classes, "weight SVM hinge loss by inverse class frequency");
  sub->add_option("--degree", h.degree, "polynomial kernel degree")->check(CLI::PositiveNumber);
  sub->add_option("--coef0", h.coef0, "polynomial kernel offset");
  sub->add_option("--hidden", h.hidden, "MLP hidden layer widths")->delimiter(',');
  sub->add_option("--learning-rate", h.learning_rate, "MLP learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--momentum", h.momentum, "MLP momentum")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--ann-epochs", h.ann_epochs, "MLP epochs")->check(CLI::PositiveNumber);
  sub->add_option("--batch-size", h.batch_size, "MLP mini-batch size")->check(CLI::PositiveNumber);
  sub->add_option("--min-df", h.min_df, "drop tokens in fewer training documents than this");
  sub->add_option("--max-vocabulary", h.max_vocabulary, "vocabulary size cap")->check(CLI::PositiveNumber);
}

/// One of the six model configurations of the comparison table.
struct ModelSpec {
  enum class Family { LinearSvm, PolySvm, Mlp };
  std::string id;
  std::string display;
  Family family;
  ActivationKind activation = ActivationKind::ReLU;
};

inline std::vector<std::string> all_model_ids() {
  return {"svm-linear", "svm-poly", "ann-relu", "ann-tanh", "ann-logistic", "ann-identity"};
}

inline ModelSpec parse_model_spec(std::string_view id) {
  using F = ModelSpec::Family;
  if (id == "svm-linear" || id == "svm") return {"svm-linear", "SVM", F::LinearSvm};
  if (id == "svm-poly") return {"svm-poly", "SVM (poly. kernel)", F::PolySvm};
  if (id.starts_with("ann-")) {
    if (auto act = parse_activation(id.substr(4))) {
      static const std::map<ActivationKind, std::string> names{{ActivationKind::ReLU, "ReLU"},
                                                                {ActivationKind::Tanh, "tanh"},
                                                                {ActivationKind::Logistic, "logistic"},
                                                                {ActivationKind::Identity, "identity"}};
      return {std::string(id), "ANN (" + names.at(*act) + ")", F::Mlp, *act};
    }
  }
  throw UsageError("unknown model \"" + std::string(id) + "\"; expected one of svm-linear, svm-poly, ann-relu, "
                   "ann-tanh, ann-logistic, ann-identity");
}

inline nlohmann::json training_config_json(const ModelSpec& spec, const HyperParams& h, std::uint64_t seed) {
  nlohmann::json j{{"model", spec.id}, {"seed", seed}, {"min_df", h.min_df}, {"max_vocabulary", h.max_vocabulary}};
  if (spec.family == ModelSpec::Family::Mlp) {
    j["activation"] = std::string(to_string(spec.activation));
    j["hidden"] = h.hidden;
    j["learning_rate"] = h.learning_rate;
    j["momentum"] = h.momentum;
    j["epochs"] = h.ann_epochs;
    j["batch_size"] = h.batch_size;
  } else {
    j["lambda"] = h.lambda;
    j["epochs"] = h.svm_epochs;
    j["initial_rate"] = h.initial_rate;
    j["balance_classes"] = h.balance_classes;
    if (spec.family == ModelSpec::Family::PolySvm) {
      j["degree"] = h.degree;
      j["coef0"] = h.coef0;
    }
  }
  return j;
}

inline AnyModel train_model(const ModelSpec& spec, const HyperParams& h, std::span<const Example> data,
                            std::uint64_t seed) {
  if (spec.family == ModelSpec::Family::Mlp) {
    MlpTrainConfig c;
    c.hidden = h.hidden;
    c.activation = spec.activation;
    c.learning_rate = h.learning_rate;
    c.momentum = h.momentum;
    c.epochs = h.ann_epochs;
    c.batch_size = h.batch_size;
    c.rng_seed = seed;
    return train_mlp(data, c);
  }
  SvmTrainConfig c;
  c.lambda = h.lambda;
  c.epochs = h.svm_epochs;
  c.rng_seed = seed;
  c.balance_classes = h.balance_classes;
  c.schedule.initial_rate = h.initial_rate;
  if (spec.family == ModelSpec::Family::LinearSvm) return train_linear(data, c);
  PolyKernelParams p;
  p.degree = h.degree;
  p.coef0 = h.coef0;
  return train_poly(data, c, p);
}

inline PipelineConfig pipeline_config(const HyperParams& h) {
  PipelineConfig c;
  c.min_df = h.min_df;
  c.max_vocabulary = h.max_vocabulary;
  return c;
}

inline std::vector<Example> examples_of(const FeaturePipeline& p, const std::vector<const CodeCommentPair*>& pairs) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto* pr : pairs) out.push_back({p.transform(*pr), *pr->label});
  return out;
}

inline MetricsReport score(const AnyModel& model, std::span<const Example> data, std::string model_name,
                           std::string dataset_name) {
  std::vector<Label> preds, truths;
  for (const auto& e : data) {
    preds.push_back(predict(model, e.x));
    truths.push_back(e.label);
  }
  return metrics(confusion(preds, truths), std::move(model_name), std::move(dataset_name));
}

inline void require_labeled(const Dataset& d, std::string_view what) {
  const auto unlabeled = d.counts().unlabeled();
  if (unlabeled > 0) {
    throw DataError(std::string(what) + " has " + std::to_string(unlabeled) +
                    " unlabeled pairs; every pair needs a Useful / Not Useful label");
  }
}

inline Dataset ensure_split(Dataset d, bool auto_split, std::uint64_t seed, std::ostream& err) {
  if (d.has_splits()) return d;
  if (!auto_split) throw DataError("dataset has no train/validation/test split; run `split` first or pass --auto-split");
  err << "note: dataset has no split; applying a stratified split with seed " << seed << "\n";
  return stratified_split(d, {}, seed);
}

// ---------------------------------------------------------------------------
// The command line

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) { build(); }

  int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"comment-judge"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      try {
        app_.parse(static_cast<int>(argv.size()), argv.data());
      } catch (const CLI::CallForHelp&) {
        out_ << (active() ? active()->help() : app_.help());
        return 0;
      } catch (const CLI::CallForAllHelp&) {
        out_ << app_.help("", CLI::AppFormatMode::All);
        return 0;
      } catch (const CLI::ParseError& e) {
        err_ << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::kUsage);
      }
      apply_config_file();
      check_required();
      validate_format();
      dispatch_();
      return 0;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << "\n";
      return static_cast<int>(ExitCode::kUsage);
    } catch (const Error& e) {
      err_ << "error: " << e.what() << "\n";
      return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return static_cast<int>(ExitCode::kData);
    }
  }

 private:
  CLI::App* active() const {
    const auto subs = app_.get_subcommands();
    return subs.empty() ? nullptr : subs.front();
  }

  void build() {
    app_.description("Classify C code comments as Useful / Not Useful and run the seed-vs-augmented experiment.");
    app_.require_subcommand(1);
    app_.option_defaults()->always_capture_default();
    app_.add_option("--config", g_.config_path, "key = value file; command-line flags override it");
    app_.add_option("--seed", g_.seed, "seed for every random choice");
    app_.add_option("--out-dir", g_.out_dir, "directory for output artifacts");
    app_.add_option("--format", g_.format, "dataset output format: csv or jsonl (default: from file extension)");
    app_.add_option("--endpoint", g_.endpoint,
                    std::string("base URL of the chat-completion endpoint (default: $") + kEndpointEnv + ")");
    app_.add_option("--endpoint-model", g_.endpoint_model, "model identifier sent to the endpoint");
    app_.add_option("--max-in-flight", g_.max_in_flight, "concurrent endpoint requests")->check(CLI::PositiveNumber);
    app_.add_option("--pairs-per-request", g_.pairs_per_request, "pairs asked for per generation request")
        ->check(CLI::PositiveNumber);
    app_.add_option("--max-retries", g_.max_retries, "transport retries per request")->check(CLI::NonNegativeNumber);
    app_.add_option("--timeout", g_.timeout_seconds, "per-request timeout in seconds")->check(CLI::PositiveNumber);

    build_extract();
    build_split();
    build_train();
    build_evaluate();
    build_augment();
    build_experiment();
    build_kappa();
  }

  // Options not given on the command line take their value from --config.
  void apply_config_file() {
    if (g_.config_path.empty()) return;
    auto values = parse_config_file(read_file(g_.config_path));
    values.erase("config");
    std::vector<CLI::App*> scopes{&app_};
    if (auto* sub = active()) scopes.push_back(sub);
    std::map<std::string, CLI::Option*> by_key;
    for (auto* scope : scopes) {
      for (auto* opt : scope->get_options()) {
        if (opt->get_lnames().empty()) continue;
        by_key[config_key(opt->get_lnames().front())] = opt;
      }
    }
    for (const auto& [key, value] : values) {
      auto it = by_key.find(key);
      if (it == by_key.end()) {
        throw UsageError("config key \"" + key + "\" is not an option of `" +
                         (active() ? active()->get_name() : std::string("comment-judge")) + "`");
      }
      CLI::Option* opt = it->second;
      if (opt->count() > 0) continue;
      if (opt->get_expected_max() > 1 && opt->get_delimiter() != '\0') {
        std::vector<std::string> parts;
        std::stringstream ss(value);
        for (std::string part; std::getline(ss, part, opt->get_delimiter());) parts.emplace_back(text::trim(part));
        opt->add_result(parts);
      } else {
        opt->add_result(value);
      }
      opt->run_callback();
    }
  }

  // Required options may come from the config file, so they are checked
  // after it has been applied rather than by the parser.
  void require(CLI::App* sub, CLI::Option* opt) { required_.emplace_back(sub, opt); }

  void check_required() const {
    for (const auto& [sub, opt] : required_) {
      if (sub == active() && opt->count() == 0) throw UsageError(opt->get_name() + " is required");
    }
  }

  void validate_format() const {
    if (!g_.format.empty() && !parse_format(g_.format)) throw UsageError("--format must be csv or jsonl");
  }

  DatasetFormat output_format(const fs::path& path) const {
    if (!g_.format.empty()) return *parse_format(g_.format);
    return format_from_path(path);
  }

  fs::path out_dir() const {
    fs::path d(g_.out_dir);
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) throw IoError("cannot create output directory " + d.string() + ": " + ec.message());
    return d;
  }

  // Writes every option's final value so the run can be replayed with --config.
  void echo_config(const fs::path& dir) const {
    std::string s = "# resolved configuration\n# command: " + active()->get_name() + "\n";
    for (const CLI::App* scope : {static_cast<const CLI::App*>(&app_), static_cast<const CLI::App*>(active())}) {
      for (const auto* opt : scope->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const auto name = opt->get_lnames().front();
        if (name == "help" || name == "help-all" || name == "config") continue;
        std::string value;
        if (opt->count() > 0) {
          for (std::size_t i = 0; i < opt->results().size(); ++i) {
            value += (i ? "," : "") + opt->results()[i];
          }
        } else {
          value = opt->get_default_str();
          if (value.size() >= 2 && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
        }
        s += name + " = " + value + "\n";
      }
    }
    write_file(dir / kResolvedConfigName, s);
  }

  GenerativeEndpointConfig endpoint_config() const {
    GenerativeEndpointConfig c;
    c.base_url = g_.endpoint;
    if (c.base_url.empty()) {
      if (const char* env = std::getenv(kEndpointEnv)) c.base_url = env;
    }
    c.model = g_.endpoint_model;
    c.max_in_flight = g_.max_in_flight;
    c.pairs_per_request = g_.pairs_per_request;
    c.max_retries = g_.max_retries;
    c.timeout = std::chrono::milliseconds(static_cast<long long>(g_.timeout_seconds * 1000.0));
    c.validate();
    return c;
  }

  // --- extract -------------------------------------------------------------

  struct ExtractArgs {
    std::string input;
    std::string output;
    std::size_t context_lines = 5;
  } ex_;

  void build_extract() {
    auto* sub = app_.add_subcommand("extract", "collect comment/code pairs from *.c and *.h files");
    require(sub, sub->add_option("--input", ex_.input, "directory to scan recursively"));
    sub->add_option("--output", ex_.output, "dataset to write (default: <out-dir>/extracted.jsonl)");
    sub->add_option("--context-lines", ex_.context_lines, "code lines kept after each comment")
        ->check(CLI::PositiveNumber);
    sub->callback([this] { dispatch_ = [this] { cmd_extract(); }; });
  }

  void cmd_extract() {
    const fs::path root(ex_.input);
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw IoError("input directory " + root.string() + " does not exist");
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
         !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
      const auto ext = it->path().extension().string();
      std::error_code type_ec;
      if ((ext == ".c" || ext == ".h") && !it->is_directory(type_ec)) files.push_back(it->path());
    }
    if (ec) err_ << "warning: directory walk stopped early: " << ec.message() << "\n";
    std::sort(files.begin(), files.end());

    Dataset d;
    std::size_t failed = 0;
    for (const auto& f : files) {
      std::string source;
      try {
        source = read_file(f);
      } catch (const IoError& e) {
        ++failed;
        err_ << "warning: skipping " << f.string() << ": " << e.what() << "\n";
        continue;
      }
      const auto rel = fs::relative(f, root, ec).generic_string();
      auto r = extract_pairs_from_c_source(source, ex_.context_lines, ec ? f.generic_string() : rel);
      if (r.error) {
        err_ << "warning: " << f.string() << ":" << r.error->line << ": " << r.error->message << "\n";
      }
      for (auto& p : r.pairs) d.pairs.push_back(std::move(p));
    }
    const auto dir = out_dir();
    const fs::path output = ex_.output.empty() ? dir / "extracted.jsonl" : fs::path(ex_.output);
    save_dataset(d, output, output_format(output));
    echo_config(dir);
    out_ << "extracted " << d.pairs.size() << " pairs from " << files.size() - failed << " files";
    if (failed) out_ << " (" << failed << " unreadable)";
    out_ << " -> " << output.string() << "\n";
  }

  // --- split ---------------------------------------------------------------

  struct SplitArgs {
    std::string input;
    std::string output;
    double test = 0.19;
    double validation = 0.10;
  } sp_;

  void build_split() {
    auto* sub = app_.add_subcommand("split", "assign a stratified train/validation/test split");
    require(sub, sub->add_option("--input", sp_.input, "labeled dataset"));
    sub->add_option("--output", sp_.output, "split dataset to write (default: <out-dir>/split.jsonl)");
    sub->add_option("--test-fraction", sp_.test, "fraction of each label class held out for test")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--validation-fraction", sp_.validation, "fraction held out for validation")
        ->check(CLI::Range(0.0, 1.0));
    sub->callback([this] { dispatch_ = [this] { cmd_split(); }; });
  }

  void cmd_split() {
    if (sp_.test + sp_.validation >= 1.0) throw UsageError("test + validation fractions must be below 1");
    const auto d = stratified_split(load_dataset(sp_.input), {sp_.test, sp_.validation}, g_.seed);
    const auto dir = out_dir();
    const fs::path output = sp_.output.empty() ? dir / "split.jsonl" : fs::path(sp_.output);
    save_dataset(d, output, output_format(output));
    echo_config(dir);
    const auto c = d.counts();
    out_ << "train " << c.count(std::nullopt, std::nullopt, Split::Train) << ", validation "
         << c.count(std::nullopt, std::nullopt, Split::Validation) << ", test "
         << c.count(std::nullopt, std::nullopt, Split::Test) << " -> " << output.string() << "\n";
  }

  // --- train ---------------------------------------------------------------

  struct TrainArgs {
    std::string dataset;
    std::string model = "svm-linear";
    std::string activation = "relu";
    bool auto_split = false;
    HyperParams hp;
  } tr_;

  void build_train() {
    auto* sub = app_.add_subcommand("train", "fit features on the train split and train one model");
    require(sub, sub->add_option("--dataset", tr_.dataset, "labeled dataset with splits"));
    sub->add_option("--model", tr_.model, "svm-linear, svm-poly or ann");
    sub->add_option("--activation", tr_.activation, "ANN hidden activation: relu, tanh, logistic or identity");
    sub->add_flag("--auto-split", tr_.auto_split, "split an unsplit dataset with --seed");
    add_hyperparams(sub, tr_.hp);
    sub->callback([this] { dispatch_ = [this] { cmd_train(); }; });
  }

  void cmd_train() {
    std::string id = tr_.model;
    if (id == "ann" || id == "mlp") id = "ann-" + tr_.activation;
    const auto spec = parse_model_spec(id);

    auto d = load_dataset(tr_.dataset);
    require_labeled(d, "dataset");
    d = ensure_split(std::move(d), tr_.auto_split, g_.seed, err_);
    const auto pipeline = fit(pipeline_config(tr_.hp), d);
    const auto train = examples_of(pipeline, d.in_split(Split::Train));
    ModelContainer c{train_model(spec, tr_.hp, train, g_.seed), pipeline.width(), pipeline.fingerprint(),
                     training_config_json(spec, tr_.hp, g_.seed)};

    const auto dir = out_dir();
    save_model(c, dir / "model.json");
    save_pipeline(pipeline, dir / "pipeline.json");
    echo_config(dir);
    out_ << "trained " << spec.display << " on " << train.size() << " pairs (" << pipeline.width()
         << " features) -> " << (dir / "model.json").string() << "\n";

    const auto validation = examples_of(pipeline, d.in_split(Split::Validation));
    if (validation.empty()) {
      err_ << "warning: validation split is empty; no validation metrics\n";
      return;
    }
    const auto report = score(c.model, validation, spec.display, "validation");
    write_file(dir / "validation_metrics.json", to_json(report).dump(2) + "\n");
    out_ << render_metrics(report);
  }

  // --- evaluate ------------------------------------------------------------

  struct EvaluateArgs {
    std::string model;
    std::string pipeline;
    std::string dataset;
    std::string embeddings;
  } ev_;

  void build_evaluate() {
    auto* sub = app_.add_subcommand("evaluate", "score a trained model on the test split");
    require(sub, sub->add_option("--model", ev_.model, "model file written by train"));
    sub->add_option("--pipeline", ev_.pipeline, "feature pipeline file (default: pipeline.json beside the model)");
    require(sub, sub->add_option("--dataset", ev_.dataset, "labeled dataset with a test split"));
    sub->add_option("--embeddings", ev_.embeddings, "embedding file used when the pipeline was fitted");
    sub->callback([this] { dispatch_ = [this] { cmd_evaluate(); }; });
  }

  void cmd_evaluate() {
    const auto container = load_model(ev_.model);
    const fs::path pipeline_path =
        ev_.pipeline.empty() ? fs::path(ev_.model).parent_path() / "pipeline.json" : fs::path(ev_.pipeline);
    const auto pipeline =
        load_pipeline(pipeline_path, ev_.embeddings.empty() ? nullptr : import_embeddings(ev_.embeddings));
    container.require_pipeline(pipeline);

    const auto d = load_dataset(ev_.dataset);
    const auto test_pairs = d.in_split(Split::Test);
    if (test_pairs.empty()) throw DataError("dataset has no test split; run `split` first");
    for (const auto* p : test_pairs) {
      if (!p->label) throw DataError("test pair \"" + p->id + "\" is unlabeled");
    }
    const auto test = examples_of(pipeline, test_pairs);
    const auto name = container.training_config.value("model", std::string(model_kind(container.model)));
    const auto report = score(container.model, test, name, "test");
    const auto dir = out_dir();
    write_file(dir / "test_metrics.json", to_json(report).dump(2) + "\n");
    echo_config(dir);
    out_ << render_metrics(report);
  }

  // --- augment -------------------------------------------------------------

  struct AugmentArgs {
    std::string dataset;
    std::size_t target = 0;
    std::string output;
  } au_;

  void build_augment() {
    auto* sub = app_.add_subcommand("augment", "generate, label and merge new pairs through the endpoint");
    require(sub, sub->add_option("--dataset", au_.dataset, "labeled seed dataset"));
    require(sub, sub->add_option("--target", au_.target, "number of new pairs to add"));
    sub->add_option("--output", au_.output, "integrated dataset (default: <out-dir>/integrated.jsonl)");
    sub->callback([this] { dispatch_ = [this] { cmd_augment(); }; });
  }

  AugmentationResult run_augmentation(const Dataset& seed, std::size_t target, const fs::path& dir) {
    AuditLog audit;
    AugmentationResult r;
    if (target == 0) {
      struct Unused final : ChatClient {
        std::string complete(const ChatRequest&) override { throw EndpointError("no requests expected"); }
      } unused;
      r = augmentation_pipeline({}, unused, seed, 0, g_.seed);
    } else {
      const auto cfg = endpoint_config();
      HttpChatClient client(cfg, HttpChatClient::api_key_from_env());
      try {
        r = augmentation_pipeline(cfg, client, seed, target, g_.seed, &audit);
      } catch (...) {
        write_file(dir / "audit.jsonl", audit.to_jsonl());
        throw;
      }
    }
    write_file(dir / "audit.jsonl", audit.to_jsonl());
    write_file(dir / "augmentation_summary.json", summary_json(r, target).dump(2) + "\n");
    if (r.status == AugmentationStatus::BudgetExhausted) {
      err_ << "warning: request budget exhausted after " << r.requests << " requests; accepted "
           << r.generated.pairs.size() << " of " << target << " pairs\n";
    }
    return r;
  }

  void cmd_augment() {
    const auto seed = load_dataset(au_.dataset);
    require_labeled(seed, "seed dataset");
    const auto dir = out_dir();
    echo_config(dir);
    const auto r = run_augmentation(seed, au_.target, dir);
    const fs::path output = au_.output.empty() ? dir / "integrated.jsonl" : fs::path(au_.output);
    save_dataset(r.dataset, output, output_format(output));
    out_ << "accepted " << r.generated.pairs.size() << " of " << au_.target << " requested pairs ("
         << r.candidates << " candidates, " << r.requests << " requests); integrated dataset has "
         << r.dataset.pairs.size() << " pairs -> " << output.string() << "\n";
  }

  // --- experiment ----------------------------------------------------------

  struct ExperimentArgs {
    std::string dataset;
    std::size_t target = 0;
    std::vector<std::string> models = all_model_ids();
    bool auto_split = true;
    HyperParams hp;
  } xp_;

  void build_experiment() {
    auto* sub = app_.add_subcommand("experiment", "train on seed data, augment, retrain, and compare");
    require(sub, sub->add_option("--dataset", xp_.dataset, "labeled seed dataset"));
    require(sub, sub->add_option("--target", xp_.target, "number of generated pairs to add"));
    sub->add_option("--models", xp_.models, "comma-separated model list")->delimiter(',');
    sub->add_option("--auto-split", xp_.auto_split, "split an unsplit seed dataset with --seed");
    add_hyperparams(sub, xp_.hp);
    sub->callback([this] { dispatch_ = [this] { cmd_experiment(); }; });
  }

  std::vector<MetricsReport> train_and_score(const std::vector<ModelSpec>& specs, const Dataset& d,
                                             const std::string& corpus) {
    const auto pipeline = fit(pipeline_config(xp_.hp), d);
    const auto train = examples_of(pipeline, d.in_split(Split::Train));
    const auto test = examples_of(pipeline, d.in_split(Split::Test));
    std::vector<MetricsReport> out;
    for (const auto& spec : specs) {
      const auto model = train_model(spec, xp_.hp, train, g_.seed);
      out.push_back(score(model, test, spec.display, corpus));
    }
    return out;
  }

  void cmd_experiment() {
    std::vector<ModelSpec> specs;
    for (const auto& m : xp_.models) specs.push_back(parse_model_spec(m));
    if (specs.empty()) throw UsageError("no models selected");

    auto seed = load_dataset(xp_.dataset);
    require_labeled(seed, "seed dataset");
    seed = ensure_split(std::move(seed), xp_.auto_split, g_.seed, err_);
    if (seed.in_split(Split::Test).empty()) throw DataError("seed dataset has an empty test split");

    const auto dir = out_dir();
    echo_config(dir);
    const auto seed_reports = train_and_score(specs, seed, "seed");
    const auto aug = run_augmentation(seed, xp_.target, dir);

    // The test split is frozen from the seed corpus.
    std::vector<std::string> seed_test, integrated_test;
    for (const auto* p : seed.in_split(Split::Test)) seed_test.push_back(p->id);
    for (const auto* p : aug.dataset.in_split(Split::Test)) integrated_test.push_back(p->id);
    if (seed_test != integrated_test) throw DataError("integrated corpus changed the frozen test split");

    const auto integrated_reports = train_and_score(specs, aug.dataset, "integrated");
    const auto report = compare(seed_reports, integrated_reports);

    save_dataset(aug.dataset, dir / "integrated.jsonl", DatasetFormat::Jsonl);
    auto j = to_json(report);
    j["seed_pairs"] = seed.pairs.size();
    j["generated_pairs"] = aug.generated.pairs.size();
    j["test_pairs"] = seed_test.size();
    j["seed"] = g_.seed;
    write_file(dir / "comparison.json", j.dump(2) + "\n");
    const auto table = "Model performance comparison (test split frozen from the seed corpus: " +
                       std::to_string(seed_test.size()) + " pairs; " + std::to_string(seed.pairs.size()) +
                       " seed + " + std::to_string(aug.generated.pairs.size()) + " generated pairs)\n\n" +
                       render_comparison(report);
    write_file(dir / "comparison.txt", table);
    out_ << table;
  }

  // --- kappa ---------------------------------------------------------------

  struct KappaArgs {
    std::string annotations;
  } ka_;

  void build_kappa() {
    auto* sub = app_.add_subcommand("kappa", "inter-annotator agreement from an item_id,rater_id,label CSV");
    require(sub, sub->add_option("--annotations", ka_.annotations, "annotation CSV"));
    sub->callback([this] { dispatch_ = [this] { cmd_kappa(); }; });
  }

  void cmd_kappa() {
    const auto table = load_annotations(ka_.annotations);
    const auto s = mean_pairwise_kappa(table);
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : s.pairs) {
      out_ << "kappa(" << p.rater_a << ", " << p.rater_b << ") = "
           << (p.kappa ? format_metric(*p.kappa) : std::string("undefined")) << "\n";
      pairs.push_back({{"rater_a", p.rater_a},
                       {"rater_b", p.rater_b},
                       {"kappa", p.kappa ? nlohmann::json(*p.kappa) : nlohmann::json(nullptr)}});
    }
    out_ << "mean pairwise kappa = " << format_metric(s.mean) << " (" << s.pairs_used << " rater pairs)\n";
    const auto dir = out_dir();
    write_file(dir / "kappa.json",
               nlohmann::json{{"pairs", pairs}, {"mean", s.mean}, {"pairs_used", s.pairs_used}}.dump(2) + "\n");
    echo_config(dir);
  }

  std::ostream& out_;
  std::ostream& err_;
  CLI::App app_{"comment-judge", "comment-judge"};
  GlobalOptions g_;
  std::function<void()> dispatch_ = [] {};
  std::vector<std::pair<CLI::App*, CLI::Option*>> required_;
};

/// Runs one command line (without the program name); returns the exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  Cli cli(out, err);
  return cli.run(args);
}

}  // namespace comment_judge::cli
