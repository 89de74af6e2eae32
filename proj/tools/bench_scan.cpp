// Benchmark for the corpus scanner: serial reference vs the OpenMP
// shard-parallel path at several worker counts, on a synthetic corpus with
// planted treebank lines.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stag/labelspace.hpp"
#include "stag/pilescan.hpp"
#include "stag/rng.hpp"

namespace fs = std::filesystem;

namespace {

std::string synth_shard(uint64_t seed, size_t target_bytes) {
    static const char* words[] = {"the", "model", "tags",  "words", "with",
                                  "noun", "verbs", "spans", "data",  "corpus"};
    std::string out;
    out.reserve(target_bytes + 128);
    stag::Rng rng(seed);
    while (out.size() < target_bytes) {
        if (rng.below(200) == 0) {
            // planted UD-style line
            out += "4\tund\tund\tCCONJ\tKON\t_\t5\tcc\t_\t_\n";
        } else {
            const size_t n = 6 + rng.below(10);
            for (size_t i = 0; i < n; ++i) {
                if (i) {
                    out += ' ';
                }
                out += words[rng.below(10)];
            }
            out += '\n';
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    size_t shard_count = 8;
    size_t shard_mb = 8;
    if (argc > 1) {
        shard_count = std::stoul(argv[1]);
    }
    if (argc > 2) {
        shard_mb = std::stoul(argv[2]);
    }

    const fs::path dir = fs::temp_directory_path() / "stag_bench_corpus";
    fs::create_directories(dir);
    std::vector<std::string> shards;
    for (size_t i = 0; i < shard_count; ++i) {
        const fs::path p = dir / ("shard_" + std::to_string(i) + ".txt");
        std::ofstream(p, std::ios::binary) << synth_shard(i, shard_mb << 20);
        shards.push_back(p.string());
    }

    const stag::LabelSet labels = stag::original_labels(stag::Task::POS);
    const auto patterns = stag::patterns_for_task(stag::Task::POS, labels);

    std::printf("%zu shards x %zu MiB, %zu patterns\n", shard_count, shard_mb,
                patterns.size());
    std::printf("%-10s %10s %12s %10s\n", "mode", "seconds", "MB/s", "hits(CCONJ)");

    stag::ScanOptions opt;
    auto run = [&](const char* name, int workers) {
        opt.workers = workers;
        const auto t0 = std::chrono::steady_clock::now();
        const auto report = workers <= 1 ? stag::scan_serial(shards, patterns, opt)
                                         : stag::scan(shards, patterns, opt);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%-10s %10.3f %12.1f %10llu\n", name, secs,
                    static_cast<double>(report.bytes_scanned) / 1e6 / secs,
                    static_cast<unsigned long long>(report.labels.at("CCONJ").total));
        return report;
    };

    const auto serial = run("serial", 1);
    for (int workers : {2, 4, 8}) {
        const auto parallel = run(("omp-" + std::to_string(workers)).c_str(), workers);
        if (parallel.labels.at("CCONJ").total != serial.labels.at("CCONJ").total) {
            std::fprintf(stderr, "mismatch vs serial reference at %d workers\n", workers);
            return 1;
        }
    }

    fs::remove_all(dir);
    return 0;
}
