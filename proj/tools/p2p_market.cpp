// Command-line driver: one subcommand per pipeline stage.

#include "p2p/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

struct Args {
    std::string config;
    std::string out = "out";
    std::string in;
    std::optional<std::uint64_t> seed;
    unsigned threads = p2p::default_thread_count();
    std::optional<std::size_t> days;
    std::string t_grid;
    std::string p_grid;
    std::optional<double> price;
    std::optional<double> adoption;
    bool force = false;
};

// "N" means N default points; "a,b,c" is an explicit list.
void apply_grid(const std::string& spec, std::size_t& points, std::vector<double>& grid) {
    if (spec.empty()) return;
    if (spec.find(',') == std::string::npos && spec.find('.') == std::string::npos) {
        points = std::stoul(spec);
        grid.clear();
        return;
    }
    grid.clear();
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ',');) grid.push_back(std::stod(item));
}

p2p::Pipeline make_pipeline(const Args& a) {
    p2p::PipelineOptions opt;
    if (!a.config.empty()) opt.config = p2p::load_config(a.config);
    if (a.seed) opt.config.synth.rng_seed = *a.seed;
    if (a.days) opt.config.days = *a.days;
    apply_grid(a.t_grid, opt.config.t_grid_points, opt.config.t_grid);
    apply_grid(a.p_grid, opt.config.p_grid_points, opt.config.p_grid);
    if (a.price) opt.config.p_grid = {*a.price};
    if (a.adoption) opt.config.equilibrium_rate = *a.adoption;
    opt.out = a.out;
    if (!a.in.empty()) opt.scenario_dir = a.in;
    opt.threads = a.threads;
    opt.force = a.force;
    return p2p::Pipeline(std::move(opt), &std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Peer-to-peer rental market for rooftop PV and storage"};
    app.require_subcommand(1);
    Args args;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", args.out, "output directory")->capture_default_str();
        sub->add_option("--in", args.in, "scenario directory (defaults to --out)");
        sub->add_option("--seed", args.seed, "RNG seed, overrides the config");
        sub->add_option("--threads", args.threads, "worker threads (env P2P_THREADS)")->capture_default_str();
        sub->add_option("--days", args.days, "subsample K representative days");
        sub->add_option("--t-grid", args.t_grid, "adoption grid: point count or comma list");
        sub->add_option("--p-grid", args.p_grid, "purchase-price grid: point count or comma list");
        sub->add_option("--price", args.price, "single purchase price, $/yr/kW");
        sub->add_option("--adoption", args.adoption, "adoption rate for equilibrium.csv");
        sub->add_flag("--force", args.force, "recompute even when outputs are current");
    };

    struct Command {
        const char* name;
        const char* help;
        void (p2p::Pipeline::*run)();
    };
    const Command commands[] = {
        {"gen-data", "generate a synthetic scenario", &p2p::Pipeline::gen},
        {"validate", "ingest a scenario directory and report exclusions", &p2p::Pipeline::validate_input},
        {"fit", "sample bills and fit savings curves", &p2p::Pipeline::fit},
        {"sweep", "clear the market along the adoption order", &p2p::Pipeline::sweep},
        {"longrun", "long-run adoption over purchase prices", &p2p::Pipeline::longrun},
        {"subsidy", "equivalent direct subsidy", &p2p::Pipeline::subsidy},
        {"localness", "regional excess supply and transport flows", &p2p::Pipeline::localness},
        {"stakeholders", "vendor gain, utility loss and regime threshold", &p2p::Pipeline::stakeholders},
        {"all", "run every stage", &p2p::Pipeline::all},
    };
    void (p2p::Pipeline::*selected)() = nullptr;
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        if (std::string(c.name) == "gen-data") sub->alias("gen");
        common(sub);
        sub->callback([&selected, run = c.run] { selected = run; });
    }

    CLI11_PARSE(app, argc, argv);
    try {
        auto pipeline = make_pipeline(args);
        (pipeline.*selected)();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
