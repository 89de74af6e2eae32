// Experiment CLI: structured prompting runs, evaluation, label-set
// ablations, corpus scanning, and a mock scoring server.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "stag/experiment.hpp"
#include "stag/http_backend.hpp"
#include "stag/mock_backend.hpp"

namespace {

struct TagOptions {
    std::string manifest_path;
    std::string out_dir = "out";
    std::string backend_url;
    std::string mock_lexicon;
    std::string variant;
    long k = -1;
    long m = -1;
    long workers = -1;
    long seed = -1;
    bool no_bio = false;
    bool unconstrained = false;
    bool traces = false;
};

stag::ExperimentManifest load_with_overrides(const TagOptions& opt) {
    stag::ExperimentManifest manifest = stag::ExperimentManifest::load(opt.manifest_path);
    if (!opt.backend_url.empty()) {
        manifest.backend_type = "http";
        manifest.backend_url = opt.backend_url;
    }
    if (!opt.mock_lexicon.empty()) {
        manifest.mock_lexicon = opt.mock_lexicon;
    }
    if (!opt.variant.empty()) {
        manifest.variant = stag::variant_from_string(opt.variant);
    }
    if (opt.k >= 0) {
        manifest.k = static_cast<size_t>(opt.k);
    }
    if (opt.m >= 0) {
        manifest.m = static_cast<size_t>(opt.m);
    }
    if (opt.workers >= 0) {
        manifest.workers = static_cast<int>(opt.workers);
    }
    if (opt.seed >= 0) {
        manifest.base_seed = static_cast<uint64_t>(opt.seed);
    }
    if (opt.no_bio) {
        manifest.enforce_bio = false;
    }
    if (opt.unconstrained) {
        manifest.constrained = false;
    }
    if (opt.traces) {
        manifest.keep_traces = true;
    }
    return manifest;
}

void add_tag_overrides(CLI::App* cmd, TagOptions& opt) {
    cmd->add_option("--manifest", opt.manifest_path, "experiment manifest (JSON)")->required();
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--backend-url", opt.backend_url, "HTTP backend base URL");
    cmd->add_option("--mock-lexicon", opt.mock_lexicon, "word<TAB>class lexicon for the mock");
    cmd->add_option("--k", opt.k, "demonstrations per run");
    cmd->add_option("--m", opt.m, "number of runs");
    cmd->add_option("--seed", opt.seed, "base demonstration seed");
    cmd->add_option("--variant", opt.variant, "label variant: original|shuffled|proxy|words");
    cmd->add_option("--workers", opt.workers, "parallel decode jobs");
    cmd->add_flag("--no-bio-constraints", opt.no_bio, "disable BIO transition constraints");
    cmd->add_flag("--unconstrained", opt.unconstrained, "greedy generation instead of scoring");
    cmd->add_flag("--traces", opt.traces, "keep per-step decode traces");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"structured prompting experiments for sequence tagging"};
    app.require_subcommand(1);

    TagOptions tag_opt;
    auto* tag = app.add_subcommand("tag", "run structured prompting over the eval subset");
    add_tag_overrides(tag, tag_opt);

    std::string eval_dir, eval_out = "report";
    auto* eval = app.add_subcommand("eval", "aggregate prediction files into reports");
    eval->add_option("pred_dir", eval_dir, "directory produced by `tag`")->required();
    eval->add_option("--out", eval_out, "report output directory");

    TagOptions ablate_opt;
    std::vector<std::string> ablate_variants;
    auto* ablate = app.add_subcommand("ablate", "compare label-set variants");
    add_tag_overrides(ablate, ablate_opt);
    ablate->add_option("--variants", ablate_variants, "subset of original,shuffled,proxy,words")
        ->delimiter(',');

    std::string scan_corpus, scan_task = "POS", scan_dataset, scan_out = "scan";
    stag::ScanCommandOptions scan_opt;
    long scan_workers = 1, scan_window = 80, scan_cap = 10, scan_seed = 0;
    auto* scan = app.add_subcommand("scan", "scan a corpus for label occurrences and leakage");
    scan->add_option("--corpus", scan_corpus, "directory of text/gzip/jsonl shards")->required();
    scan->add_option("--task", scan_task, "POS|CHUNK|NER");
    scan->add_option("--dataset", scan_dataset, "dataset manifest (test split for leakage)")
        ->required();
    scan->add_option("--out", scan_out, "output directory");
    scan->add_option("--window", scan_window, "context characters around each sampled hit");
    scan->add_option("--sample-cap", scan_cap, "max sampled contexts per label");
    scan->add_option("--seed", scan_seed, "sampling seed");
    scan->add_option("--workers", scan_workers, "parallel shard scanners");
    scan->add_option("--attribute-refs", scan_opt.reference_manifests,
                     "treebank dataset manifests for hit attribution")
        ->delimiter(',');

    std::string serve_manifest, serve_host = "127.0.0.1";
    long serve_port = 8080;
    auto* serve = app.add_subcommand("serve", "serve the mock lexicon LM over HTTP");
    serve->add_option("--manifest", serve_manifest, "experiment manifest (mock backend config)")
        ->required();
    serve->add_option("--host", serve_host, "bind address");
    serve->add_option("--port", serve_port, "port (0 picks a free one)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*tag) {
            const auto manifest = load_with_overrides(tag_opt);
            const auto runs = stag::cmd_tag(manifest, tag_opt.out_dir);
            size_t failed = 0;
            for (const auto& r : runs) {
                failed += r.failed;
            }
            std::cout << "wrote " << runs.size() << " run(s) to " << tag_opt.out_dir;
            if (failed) {
                std::cout << " (" << failed << " failed)";
            }
            std::cout << "\n";
            if (failed == runs.size()) {
                return 3;
            }
        } else if (*eval) {
            const auto report = stag::cmd_eval(eval_dir, eval_out);
            std::cout << "metric " << report.at("metric").get<std::string>() << ": mean "
                      << report.at("mean").get<double>() << " stderr "
                      << report.at("stderr").get<double>() << " over "
                      << report.at("runs").get<size_t>() << " run(s)\n";
        } else if (*ablate) {
            const auto manifest = load_with_overrides(ablate_opt);
            if (ablate_variants.empty()) {
                ablate_variants = {"original", "shuffled", "proxy", "words"};
            }
            std::vector<stag::LabelVariant> variants;
            for (const auto& v : ablate_variants) {
                variants.push_back(stag::variant_from_string(v));
            }
            stag::cmd_ablate(manifest, variants, ablate_opt.out_dir);
            std::cout << "wrote ablation report to " << ablate_opt.out_dir << "\n";
        } else if (*scan) {
            scan_opt.scan.window = static_cast<size_t>(scan_window);
            scan_opt.scan.sample_cap = static_cast<size_t>(scan_cap);
            scan_opt.scan.seed = static_cast<uint64_t>(scan_seed);
            scan_opt.scan.workers = static_cast<int>(scan_workers);
            scan_opt.attribute = !scan_opt.reference_manifests.empty();
            stag::cmd_scan(scan_corpus, stag::task_from_string(scan_task), scan_dataset,
                           scan_out, scan_opt);
            std::cout << "wrote scan report to " << scan_out << "\n";
        } else if (*serve) {
            stag::ExperimentManifest manifest = stag::ExperimentManifest::load(serve_manifest);
            const stag::TaskDataset dataset = stag::load_dataset(manifest.dataset_manifest);
            const stag::LabelSet labels = stag::build_label_set(manifest, dataset);
            manifest.backend_type = "mock";
            auto backend = stag::build_backend(manifest, dataset, labels);
            stag::BackendServer server(*backend, serve_host, static_cast<int>(serve_port));
            const int port = server.start();
            std::cout << "serving " << backend->describe() << " on " << serve_host << ":"
                      << port << "\n";
            for (;;) {
                std::this_thread::sleep_for(std::chrono::seconds(1));
            }
        }
    } catch (const CLI::ParseError&) {
        return 2;
    } catch (const stag::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const stag::BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
