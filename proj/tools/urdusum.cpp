#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <urdusum/urdusum.hpp>

namespace {

template <typename T>
void add_override(CLI::App& app, const std::string& flag, std::optional<T>& dst, const std::string& help) {
  app.add_option_function<T>(flag, [&dst](const T& v) { dst = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Urdu abstractive summarization: preprocess, train, summarize, evaluate"};
  app.require_subcommand(1);
  app.fallthrough();

  std::filesystem::path config_path;
  urdusum::Overrides overrides;
  app.add_option("--config", config_path, "Run configuration JSON")->required()->check(CLI::ExistingFile);
  add_override(app, "--seed", overrides.seed, "Split, initialization and shuffle seed");
  add_override(app, "--beam", overrides.beam, "Beam size");
  add_override(app, "--max-len", overrides.max_len, "Maximum summary length in tokens");
  add_override(app, "--alpha", overrides.alpha, "Length penalty exponent (0 = off)");
  add_override(app, "--epochs", overrides.epochs, "Training epochs");
  add_override(app, "--lr", overrides.lr, "Learning rate");

  auto* preprocess = app.add_subcommand("preprocess", "Tokenize the corpus into the preprocessed JSONL file");
  auto* train = app.add_subcommand("train", "Split, build the vocabulary, train and write the checkpoint");
  auto* summarize = app.add_subcommand("summarize", "Summarize {id, text} JSONL documents");
  auto* evaluate = app.add_subcommand("evaluate", "Score the checkpoint on the held-out split");

  std::filesystem::path input, output;
  summarize->add_option("--input", input, "Input JSONL")->required()->check(CLI::ExistingFile);
  summarize->add_option("--output", output, "Output JSONL (default: stdout)");
  bool on_train = false;
  evaluate->add_flag("--on-train", on_train, "Evaluate on the training side instead");

  CLI11_PARSE(app, argc, argv);

  try {
    urdusum::RunConfig cfg = urdusum::load_run_config(config_path);
    urdusum::apply_overrides(cfg, overrides);
    cfg.train.validate();
    cfg.decode.validate();

    if (*preprocess) return urdusum::cmd_preprocess(cfg, std::cout);
    if (*train) return urdusum::cmd_train(cfg, std::cout);
    if (*evaluate) return urdusum::cmd_evaluate(cfg, on_train, std::cout);
    if (output.empty()) return urdusum::cmd_summarize(cfg, input, std::cout);
    std::ostringstream buffer;
    const int code = urdusum::cmd_summarize(cfg, input, buffer);
    urdusum::write_file_atomic(output, buffer.str());
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return urdusum::exit_code_for(e);
  }
}
