#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "stag/backend.hpp"
#include "stag/corpus.hpp"
#include "stag/decoder.hpp"
#include "stag/labelspace.hpp"
#include "stag/metrics.hpp"
#include "stag/pilescan.hpp"

namespace stag {

// Bad user configuration; maps to exit code 2 in the CLI (backend and IO
// failures map to 3).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kArtifactVersion = "0.1.0";

// Everything needed to reproduce a run byte-identically against the same
// backend; serialized as JSON next to every output directory.
struct ExperimentManifest {
    Task task = Task::POS;
    std::string dataset_manifest; // plain-text key=value dataset description

    LabelVariant variant = LabelVariant::original;
    uint64_t shuffle_seed = 0;
    int proxy_start = 11;
    std::string words_map; // TSV path, required for the words variant

    size_t k = 10;
    size_t m = 5;
    size_t n_eval = 1000; // 0 means the whole test split
    uint64_t eval_seed = 0;
    uint64_t base_seed = 1;
    std::vector<uint64_t> demo_seeds;
    size_t max_attempts = 100;

    PromptConfig prompt;
    bool constrained = true;
    bool enforce_bio = true;
    int max_gen_tokens = 512;

    std::string backend_type = "mock"; // mock | http
    std::string backend_url;
    std::string mock_lexicon; // optional TSV; default: built from train split
    double mock_epsilon = 0.01;
    double http_timeout_sec = 30.0;
    int http_retries = 2;

    int workers = 1;
    bool keep_traces = false;

    static ExperimentManifest from_json(const nlohmann::json& j);
    static ExperimentManifest load(const std::string& path);
    nlohmann::json to_json() const;
};

LabelSet build_label_set(const ExperimentManifest& manifest, const TaskDataset& dataset);

std::unique_ptr<Backend> build_backend(const ExperimentManifest& manifest,
                                       const TaskDataset& dataset, const LabelSet& labels);

ExperimentConfig build_experiment_config(const ExperimentManifest& manifest,
                                         const TaskDataset& dataset, const LabelSet& labels);

// Runs the experiment and writes run_<i>.pred.tsv files plus manifest.json
// into out_dir. Returns the runs.
std::vector<RunResult> cmd_tag(const ExperimentManifest& manifest, const std::string& out_dir);

// Reads prediction files + manifest from a cmd_tag output directory and
// writes report.json, per_class.csv and confusion.csv. Baselines are
// included when the dataset referenced by the manifest is readable.
nlohmann::json cmd_eval(const std::string& pred_dir, const std::string& out_dir);

// Runs each variant with identical eval subset and demonstration sentence
// selections, then emits the delta/correlation tables and (when shuffled
// is included) the true-label error analysis.
nlohmann::json cmd_ablate(const ExperimentManifest& base,
                          const std::vector<LabelVariant>& variants,
                          const std::string& out_dir);

struct ScanCommandOptions {
    ScanOptions scan;
    bool attribute = false;
    std::vector<std::string> reference_manifests; // treebanks for attribution
};

// Scans a corpus directory for the task's label patterns, runs the leakage
// detectors against the dataset's test split, and writes report.json plus
// a context-sample review file.
nlohmann::json cmd_scan(const std::string& corpus_dir, Task task,
                        const std::string& dataset_manifest, const std::string& out_dir,
                        const ScanCommandOptions& options);

// Shard discovery: regular files in the directory, sorted by path.
std::vector<std::string> list_shards(const std::string& corpus_dir);

void write_text_file(const std::string& path, const std::string& content);

} // namespace stag
