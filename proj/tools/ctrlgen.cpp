#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctrlgen/cli.hpp"

namespace {

struct Options {
    std::string config;
    std::string runs = "runs";
    bool dry_run = false;
    bool quiet = false;
    std::string strategy;
    std::string objective;
    std::string method;
    std::vector<std::string> with;
};

template <class T, class Parse>
T pick(const std::string& flag, const std::string& text, T fallback, Parse parse) {
    if (text.empty()) return fallback;
    const auto v = parse(text);
    if (!v) throw ctrlgen::ConfigError(flag, "unknown value '" + text + "'");
    return *v;
}

void print_error(const ctrlgen::Error& e) {
    std::cerr << "error: kind=" << e.kind();
    if (const auto* c = dynamic_cast<const ctrlgen::ConfigError*>(&e)) std::cerr << " field=" << c->field();
    if (const auto* m = dynamic_cast<const ctrlgen::MissingArtifactError*>(&e)) std::cerr << " producer=" << m->producer();
    std::cerr << " message=" << ctrlgen::Json(std::string(e.what())).dump() << '\n';
}

int run(const std::string& sub, const Options& o) {
    using namespace ctrlgen;
    const PipelineConfig cfg = cli::load_config(o.config);
    const cli::Run run = cli::open_run(cfg, o.runs);
    const auto strategy = pick("--strategy", o.strategy, cfg.distill, parse_distill_strategy);
    const auto objective = pick("--objective", o.objective, cfg.objective, parse_objective);
    const auto method = pick("--method", o.method, cfg.method, parse_eval_method);
    if (o.dry_run) {
        std::cout << cli::dry_run(run, sub, strategy, objective, method);
        return 0;
    }
    const cli::Log log = [&](const std::string& line) {
        if (!o.quiet) std::cerr << line << '\n';
    };
    if (sub == "synth") cli::synth(run, log);
    else if (sub == "pretrain") cli::pretrain(run, log);
    else if (sub == "generate") cli::generate(run, log);
    else if (sub == "distill") cli::distill(run, strategy, log);
    else if (sub == "train") cli::train(run, strategy, objective, log);
    else if (sub == "evaluate") cli::evaluate(run, method, strategy, objective, log);
    else if (sub == "report") {
        std::vector<cli::Run> extra;
        for (const auto& c : o.with) extra.push_back(cli::open_run(cli::load_config(c), o.runs));
        std::cout << cli::report(run, extra, log);
    }
    std::cout << run.dir.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safety/helpfulness control-token experiments on a synthetic task"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--runs", o.runs, "Root of the run directories")->capture_default_str();
    app.add_flag("--dry-run", o.dry_run, "Validate the config and print the plan without computing");
    app.add_flag("-q,--quiet", o.quiet, "No progress lines on stderr");

    auto add = [&](const char* name, const char* help) {
        CLI::App* s = app.add_subcommand(name, help);
        s->add_option("config", o.config, "INI config file")->required();
        return s;
    };
    add("synth", "Build the universe, prompts and aligned corpus");
    add("pretrain", "Pretrain the aligned base model");
    add("generate", "Self-generate and score N responses per training prompt");
    add("distill", "Distill scored samples into training examples")
        ->add_option("--strategy", o.strategy, "moec | vanilla | oversample (default: config)");
    CLI::App* train = add("train", "Fine-tune from the base checkpoint");
    train->add_option("--strategy", o.strategy, "Training data to use (default: config)");
    train->add_option("--objective", o.objective, "clm | plm | exmate | rlhf (default: config)");
    CLI::App* eval = add("evaluate", "Evaluate a method on the test split");
    eval->add_option("--method", o.method, "prompting | rerank | checkpoint (default: config)");
    eval->add_option("--strategy", o.strategy, "Checkpoint data strategy (default: config)");
    eval->add_option("--objective", o.objective, "Checkpoint objective (default: config)");
    add("report", "Merge evaluation reports into tables")
        ->add_option("--with", o.with, "Configs of extra runs for the data-size table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        return run(app.get_subcommands().front()->get_name(), o);
    } catch (const ctrlgen::Error& e) {
        print_error(e);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: kind=internal message=" << ctrlgen::Json(std::string(e.what())).dump() << '\n';
        return 1;
    }
}
