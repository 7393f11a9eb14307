#include <csignal>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ctquant/http_server.hpp"
#include "ctquant/phantom.hpp"
#include "ctquant/pipeline.hpp"
#include "ctquant/project.hpp"
#include "ctquant/tables.hpp"

namespace {

using namespace ctquant;

struct StageArgs {
    std::string project;
    std::string params;
    bool force = false;
    std::optional<int> threads;
};

void add_stage_flags(CLI::App* cmd, StageArgs& a) {
    cmd->add_option("--project", a.project, "project directory")->required();
    cmd->add_option("--params", a.params, "parameter file copied into the project before running");
    cmd->add_flag("--force", a.force, "rerun stages even when cached");
    cmd->add_option("--threads", a.threads, "override num_threads");
}

void print_run(const PipelineRun& run) {
    for (Stage s : run.cached) std::cout << "cached   " << to_string(s) << "\n";
    for (Stage s : run.executed) std::cout << "executed " << to_string(s) << "\n";
}

void print_summary(const ProjectLayout& p) {
    const Report r = read_report_json(p.report_json());
    std::cout << "regions " << r.regions_analyzed << "/" << r.regions_total << " analyzed"
              << ", volume analyzed " << format_number(r.global_volume_analyzed_fraction) << "\n";
    for (std::size_t c = 0; c < 5; ++c) {
        if (!r.classes[c]) continue;
        std::cout << "class " << kClassNames[c] << ": volume " << format_number(r.classes[c]->volume_fraction)
                  << " mass " << format_number(r.classes[c]->mass_fraction) << "\n";
    }
}

int run_stage_command(const StageArgs& a, Stage through, bool summary) {
    const ProjectLayout p = load_project(a.project);
    if (!a.params.empty()) save_parameters(p.parameters_file(), load_parameters(a.params));
    print_run(run_pipeline(p, through, {a.force, a.threads}));
    if (summary) print_summary(p);
    return 0;
}

HttpServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ctquant: particle segmentation, histogram extraction and phase quantification for CT volumes"};
    app.require_subcommand(1);

    std::string input;
    std::string init_params;
    bool overwrite = false;
    StageArgs init_args;
    auto* init = app.add_subcommand("init", "create a project from a TIFF stack and import it");
    init->add_option("--input", input, "directory of 16-bit TIFF planes")->required();
    init->add_option("--project", init_args.project, "project directory to create")->required();
    init->add_option("--params", init_params, "initial parameter file");
    init->add_flag("--overwrite", overwrite, "replace an existing project");

    StageArgs seg, ext, ana, quant, rep;
    auto* segment = app.add_subcommand("segment", "threshold, label and clean the volume");
    add_stage_flags(segment, seg);
    auto* extract = app.add_subcommand("extract", "region properties and histograms");
    add_stage_flags(extract, ext);
    auto* analyze = app.add_subcommand("analyze", "peak detection and per-region quantification");
    add_stage_flags(analyze, ana);
    auto* quantify = app.add_subcommand("quantify", "run every stage through the report");
    add_stage_flags(quantify, quant);
    auto* report = app.add_subcommand("report", "run through the report and print the global composition");
    add_stage_flags(report, rep);

    std::string serve_project;
    std::string host = "127.0.0.1";
    int port = 8765;
    auto* serve = app.add_subcommand("serve", "serve the project over a loopback HTTP API");
    serve->add_option("--project", serve_project, "project directory")->required();
    serve->add_option("--host", host, "loopback address")->capture_default_str();
    serve->add_option("--port", port, "port, 0 picks a free one")->capture_default_str();

    std::string phantom_out;
    PhantomSpec spec;
    auto* phantom = app.add_subcommand("phantom", "write the five-particle synthetic phantom");
    phantom->add_option("--out", phantom_out, "output directory")->required();
    phantom->add_option("--sigma", spec.sigma, "Gaussian blur in voxels")->capture_default_str();
    phantom->add_option("--noise", spec.noise, "Gaussian noise standard deviation")->capture_default_str();
    phantom->add_option("--seed", spec.seed, "noise seed")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*init) {
            const Parameters params = init_params.empty() ? Parameters{} : load_parameters(init_params);
            const ProjectLayout p = create_project(input, init_args.project, overwrite, params);
            print_run(run_pipeline(p, Stage::import));
        } else if (*segment) {
            return run_stage_command(seg, Stage::segment, false);
        } else if (*extract) {
            return run_stage_command(ext, Stage::extract, false);
        } else if (*analyze) {
            return run_stage_command(ana, Stage::analyze, false);
        } else if (*quantify) {
            return run_stage_command(quant, Stage::report, false);
        } else if (*report) {
            return run_stage_command(rep, Stage::report, true);
        } else if (*serve) {
            HttpServer server(serve_project, host);
            const int bound = server.bind(port);
            std::cout << "serving " << serve_project << " on http://" << host << ":" << bound << std::endl;
            g_server = &server;
            std::signal(SIGINT, [](int) {
                if (g_server) g_server->stop();
            });
            server.run();
            g_server = nullptr;
        } else if (*phantom) {
            const Phantom ph = write_phantom(spec, phantom_out);
            std::cout << "wrote " << ph.volume.dims().z << " planes and ground_truth.csv to " << phantom_out << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what();
        for (const auto& f : e.fields()) std::cerr << (&f == &e.fields().front() ? " (" : ", ") << f;
        std::cerr << (e.fields().empty() ? "" : ")") << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
