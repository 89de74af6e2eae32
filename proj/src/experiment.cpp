#include "stag/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stag/http_backend.hpp"
#include "stag/mock_backend.hpp"

namespace stag {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    return j.at(key).get<T>();
}

} // namespace

ExperimentManifest ExperimentManifest::from_json(const json& j) {
    ExperimentManifest m;
    try {
        m.task = task_from_string(j.at("task").get<std::string>());
        m.dataset_manifest = j.at("dataset").get<std::string>();

        if (j.contains("label")) {
            const json& l = j.at("label");
            m.variant = variant_from_string(get_or<std::string>(l, "variant", "original"));
            m.shuffle_seed = get_or<uint64_t>(l, "shuffle_seed", 0);
            m.proxy_start = get_or<int>(l, "proxy_start", 11);
            m.words_map = get_or<std::string>(l, "words_map", "");
        }

        m.k = get_or<size_t>(j, "k", 10);
        m.m = get_or<size_t>(j, "m", 5);
        m.n_eval = get_or<size_t>(j, "n_eval", 1000);
        m.eval_seed = get_or<uint64_t>(j, "eval_seed", 0);
        m.base_seed = get_or<uint64_t>(j, "base_seed", 1);
        m.demo_seeds = get_or<std::vector<uint64_t>>(j, "demo_seeds", {});
        m.max_attempts = get_or<size_t>(j, "max_attempts", 100);

        if (j.contains("prompt")) {
            const json& p = j.at("prompt");
            m.prompt.context_keyword = get_or<std::string>(p, "context_keyword", "Context");
            m.prompt.tagged_keyword = get_or<std::string>(p, "tagged_keyword", "Tagged");
            const std::string d = get_or<std::string>(p, "delimiter", "/");
            if (d.size() != 1) {
                throw ConfigError("prompt.delimiter must be a single character");
            }
            m.prompt.delimiter = d[0];
            m.prompt.include_word_in_tagged = get_or<bool>(p, "include_word_in_tagged", true);
        }

        if (j.contains("decode")) {
            const json& d = j.at("decode");
            m.constrained = get_or<bool>(d, "constrained", true);
            m.enforce_bio = get_or<bool>(d, "enforce_bio", true);
            m.max_gen_tokens = get_or<int>(d, "max_gen_tokens", 512);
        }

        if (j.contains("backend")) {
            const json& b = j.at("backend");
            m.backend_type = get_or<std::string>(b, "type", "mock");
            m.backend_url = get_or<std::string>(b, "url", "");
            m.mock_lexicon = get_or<std::string>(b, "lexicon", "");
            m.mock_epsilon = get_or<double>(b, "epsilon", 0.01);
            m.http_timeout_sec = get_or<double>(b, "timeout_sec", 30.0);
            m.http_retries = get_or<int>(b, "retries", 2);
        }

        m.workers = get_or<int>(j, "workers", 1);
        m.keep_traces = get_or<bool>(j, "keep_traces", false);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid experiment manifest: ") + e.what());
    }
    return m;
}

ExperimentManifest ExperimentManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open experiment manifest: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    ExperimentManifest m = from_json(j);
    // Relative paths in the manifest are relative to the manifest itself.
    const auto base = fs::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && !fs::path(p).is_absolute()) {
            p = (base / p).string();
        }
    };
    resolve(m.dataset_manifest);
    resolve(m.words_map);
    resolve(m.mock_lexicon);
    return m;
}

json ExperimentManifest::to_json() const {
    return json{
        {"task", to_string(task)},
        {"dataset", dataset_manifest},
        {"label",
         {{"variant", to_string(variant)},
          {"shuffle_seed", shuffle_seed},
          {"proxy_start", proxy_start},
          {"words_map", words_map}}},
        {"k", k},
        {"m", m},
        {"n_eval", n_eval},
        {"eval_seed", eval_seed},
        {"base_seed", base_seed},
        {"demo_seeds", demo_seeds},
        {"max_attempts", max_attempts},
        {"prompt",
         {{"context_keyword", prompt.context_keyword},
          {"tagged_keyword", prompt.tagged_keyword},
          {"delimiter", std::string(1, prompt.delimiter)},
          {"include_word_in_tagged", prompt.include_word_in_tagged}}},
        {"decode",
         {{"constrained", constrained},
          {"enforce_bio", enforce_bio},
          {"max_gen_tokens", max_gen_tokens}}},
        {"backend",
         {{"type", backend_type},
          {"url", backend_url},
          {"lexicon", mock_lexicon},
          {"epsilon", mock_epsilon},
          {"timeout_sec", http_timeout_sec},
          {"retries", http_retries}}},
        {"workers", workers},
        {"keep_traces", keep_traces},
        {"version", kArtifactVersion},
    };
}

LabelSet build_label_set(const ExperimentManifest& manifest, const TaskDataset& dataset) {
    LabelSet base = manifest.task == Task::CHUNK
                        ? original_labels(Task::CHUNK, dataset.label_inventory)
                        : original_labels(manifest.task);
    for (const auto& tag : dataset.label_inventory) {
        if (!base.contains(tag)) {
            throw ConfigError("dataset tag not in the task's label inventory: " + tag);
        }
    }
    switch (manifest.variant) {
        case LabelVariant::original:
            return base;
        case LabelVariant::shuffled:
            return shuffle_labels(base, manifest.shuffle_seed);
        case LabelVariant::proxy:
            return proxy_labels(base, manifest.proxy_start);
        case LabelVariant::words:
            if (manifest.words_map.empty()) {
                throw ConfigError("words variant requires label.words_map");
            }
            return words_labels(base, manifest.words_map);
    }
    throw std::logic_error("bad variant enum");
}

std::unique_ptr<Backend> build_backend(const ExperimentManifest& manifest,
                                       const TaskDataset& dataset, const LabelSet& labels) {
    if (manifest.backend_type == "mock") {
        MockLexiconConfig cfg;
        cfg.labels = labels;
        cfg.prompt = manifest.prompt;
        cfg.epsilon = manifest.mock_epsilon;
        cfg.lexicon = manifest.mock_lexicon.empty()
                          ? build_lexicon(dataset.train, labels)
                          : load_lexicon_tsv(manifest.mock_lexicon);
        return std::make_unique<MockLexiconBackend>(std::move(cfg));
    }
    if (manifest.backend_type == "http") {
        HttpBackendConfig cfg;
        cfg.base_url = manifest.backend_url;
        if (cfg.base_url.empty()) {
            if (const char* env = std::getenv("STAG_BACKEND_URL")) {
                cfg.base_url = env;
            }
        }
        if (cfg.base_url.empty()) {
            throw ConfigError("http backend requires backend.url or STAG_BACKEND_URL");
        }
        cfg.timeout_sec = manifest.http_timeout_sec;
        cfg.retries = manifest.http_retries;
        return std::make_unique<HttpBackend>(std::move(cfg));
    }
    throw ConfigError("unknown backend.type: " + manifest.backend_type);
}

ExperimentConfig build_experiment_config(const ExperimentManifest& manifest,
                                         const TaskDataset& dataset, const LabelSet& labels) {
    ExperimentConfig cfg;
    cfg.k = manifest.k;
    cfg.m = manifest.m;
    cfg.n_eval = manifest.n_eval == 0 ? dataset.test.size() : manifest.n_eval;
    if (cfg.n_eval > dataset.test.size()) {
        throw ConfigError("n_eval exceeds test split size (" +
                          std::to_string(dataset.test.size()) + ")");
    }
    if (manifest.k > dataset.train.size()) {
        throw ConfigError("k exceeds train split size");
    }
    cfg.eval_seed = manifest.eval_seed;
    cfg.base_seed = manifest.base_seed;
    cfg.demo_seeds = manifest.demo_seeds;
    cfg.max_attempts = manifest.max_attempts;
    cfg.decode.constrained = manifest.constrained;
    cfg.decode.enforce_bio = manifest.enforce_bio && labels.bio;
    cfg.decode.label_set = labels;
    cfg.decode.prompt_config = manifest.prompt;
    cfg.decode.max_gen_tokens = manifest.max_gen_tokens;
    cfg.workers = manifest.workers;
    cfg.keep_traces = manifest.keep_traces;
    return cfg;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write file: " + path);
    }
    out << content;
}

std::vector<RunResult> cmd_tag(const ExperimentManifest& manifest, const std::string& out_dir) {
    const TaskDataset dataset = [&] {
        try {
            return load_dataset(manifest.dataset_manifest);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("dataset: ") + e.what());
        }
    }();
    const LabelSet labels = build_label_set(manifest, dataset);
    auto backend = build_backend(manifest, dataset, labels);
    const ExperimentConfig cfg = build_experiment_config(manifest, dataset, labels);

    auto runs = run_experiment(*backend, dataset, cfg);

    fs::create_directories(out_dir);
    json dir_manifest = {{"experiment", manifest.to_json()}, {"runs", json::array()}};
    for (size_t r = 0; r < runs.size(); ++r) {
        json entry = runs[r].manifest;
        entry["failed"] = runs[r].failed;
        if (runs[r].failed) {
            entry["error"] = runs[r].error;
        } else {
            const std::string name = "run_" + std::to_string(r) + ".pred.tsv";
            write_text_file((fs::path(out_dir) / name).string(),
                            format_predictions_tsv(runs[r]));
            entry["predictions"] = name;
        }
        dir_manifest["runs"].push_back(entry);
    }
    write_text_file((fs::path(out_dir) / "manifest.json").string(), dir_manifest.dump(2) + "\n");
    return runs;
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

json spearman_json(const std::vector<std::vector<SpearmanResult>>& m) {
    json out = json::array();
    for (const auto& row : m) {
        json jrow = json::array();
        for (const auto& r : row) {
            jrow.push_back({{"rho", r.rho}, {"p", r.p_value}});
        }
        out.push_back(jrow);
    }
    return out;
}

json report_json(const AggregateReport& rep) {
    json out = {
        {"runs", rep.runs},         {"mean", rep.mean},
        {"stderr", rep.stderr_},    {"per_run", rep.per_run},
        {"per_class", rep.per_class}, {"classes", rep.classes},
        {"confusion", rep.confusion_total},
        {"confusion_display", rep.confusion_display},
    };
    if (!rep.run_spearman.empty()) {
        out["run_spearman"] = spearman_json(rep.run_spearman);
    }
    return out;
}

} // namespace

json cmd_eval(const std::string& pred_dir, const std::string& out_dir) {
    const fs::path dir(pred_dir);
    if (!fs::is_directory(dir)) {
        throw ConfigError("not a directory: " + pred_dir);
    }
    std::ifstream min(dir / "manifest.json");
    if (!min) {
        throw ConfigError("missing manifest.json in " + pred_dir);
    }
    json dir_manifest;
    min >> dir_manifest;
    const ExperimentManifest manifest =
        ExperimentManifest::from_json(dir_manifest.at("experiment"));

    std::vector<RunResult> runs;
    std::string task_name;
    for (const auto& entry : dir_manifest.at("runs")) {
        if (task_name.empty()) {
            task_name = entry.at("task").get<std::string>();
        } else if (task_name != entry.at("task").get<std::string>()) {
            throw ConfigError("mixed-task prediction files in " + pred_dir);
        }
        RunResult run;
        if (entry.value("failed", false)) {
            run.failed = true;
            run.error = entry.value("error", "");
        } else {
            const std::string fname = entry.at("predictions").get<std::string>();
            run = parse_predictions_tsv(read_file_maybe_gzip((dir / fname).string()));
        }
        run.manifest = entry;
        run.demonstrations.k = entry.value("k", size_t{0});
        for (const auto& c : entry.value("covered_labels", std::vector<std::string>())) {
            run.demonstrations.covered_labels.insert(c);
        }
        runs.push_back(std::move(run));
    }
    if (runs.empty()) {
        throw ConfigError("no runs recorded in " + pred_dir);
    }

    const Task task = task_from_string(task_name);
    const bool bio = task != Task::POS;
    // Classes come from the run manifests so evaluation does not need the
    // original dataset files.
    LabelSet labels;
    labels.classes = dir_manifest.at("runs")[0].at("classes").get<std::vector<std::string>>();
    for (const auto& c : labels.classes) {
        labels.surfaces[c] = c;
    }
    labels.bio = bio;
    labels.variant = LabelVariant::original;

    for (auto& run : runs) {
        if (!run.failed) {
            score_run(run, labels, bio);
        }
    }
    const AggregateReport rep = aggregate(runs, labels, bio);

    json out = {{"task", task_name}, {"metric", bio ? "span_f1" : "token_accuracy"}};
    out.update(report_json(rep));

    const auto seen = seen_unseen_split(runs, labels);
    json seen_json;
    for (const auto& [cls, su] : seen) {
        json e;
        if (su.seen) {
            e["seen"] = *su.seen;
        }
        if (su.unseen) {
            e["unseen"] = *su.unseen;
        }
        seen_json[cls] = e;
    }
    out["seen_unseen"] = seen_json;

    try {
        const TaskDataset dataset = load_dataset(manifest.dataset_manifest);
        const auto base = majority_baselines(dataset);
        out["baselines"] = {{"overall_majority", base.overall_majority},
                            {"per_word_majority", base.per_word_majority},
                            {"overall_majority_tag", base.overall_majority_tag}};
    } catch (const std::exception&) {
        // dataset files not reachable from here; baselines omitted
    }

    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "report.json").string(), out.dump(2) + "\n");

    std::ostringstream per_class;
    per_class << "class,score\n";
    for (const auto& [cls, score] : rep.per_class) {
        per_class << csv_escape(cls) << ',' << score << '\n';
    }
    write_text_file((fs::path(out_dir) / "per_class.csv").string(), per_class.str());

    std::ostringstream conf;
    conf << "gold\\pred";
    for (const auto& c : rep.classes) {
        conf << ',' << csv_escape(c);
    }
    conf << '\n';
    for (size_t i = 0; i < rep.classes.size(); ++i) {
        conf << csv_escape(rep.classes[i]);
        for (size_t j = 0; j < rep.classes.size(); ++j) {
            conf << ',' << (rep.confusion_total.empty() ? 0 : rep.confusion_total[i][j]);
        }
        conf << '\n';
    }
    write_text_file((fs::path(out_dir) / "confusion.csv").string(), conf.str());
    return out;
}

json cmd_ablate(const ExperimentManifest& base, const std::vector<LabelVariant>& variants,
                const std::string& out_dir) {
    if (variants.empty()) {
        throw ConfigError("ablate: no variants given");
    }
    const TaskDataset dataset = [&] {
        try {
            return load_dataset(base.dataset_manifest);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("dataset: ") + e.what());
        }
    }();
    const bool bio = dataset.task != Task::POS;

    ExperimentManifest orig_manifest = base;
    orig_manifest.variant = LabelVariant::original;
    const LabelSet original = build_label_set(orig_manifest, dataset);

    std::vector<std::pair<std::string, AggregateReport>> reports;
    std::vector<RunResult> shuffled_runs;
    LabelSet shuffled_set;
    for (const LabelVariant v : variants) {
        ExperimentManifest m = base;
        m.variant = v;
        const LabelSet labels = build_label_set(m, dataset);
        auto backend = build_backend(m, dataset, labels);
        const ExperimentConfig cfg = build_experiment_config(m, dataset, labels);
        auto runs = run_experiment(*backend, dataset, cfg);

        // Persist each variant's predictions alongside the comparison.
        const std::string sub = (fs::path(out_dir) / to_string(v)).string();
        fs::create_directories(sub);
        json dir_manifest = {{"experiment", m.to_json()}, {"runs", json::array()}};
        for (size_t r = 0; r < runs.size(); ++r) {
            json entry = runs[r].manifest;
            entry["failed"] = runs[r].failed;
            if (!runs[r].failed) {
                const std::string name = "run_" + std::to_string(r) + ".pred.tsv";
                write_text_file((fs::path(sub) / name).string(),
                                format_predictions_tsv(runs[r]));
                entry["predictions"] = name;
            }
            dir_manifest["runs"].push_back(entry);
        }
        write_text_file((fs::path(sub) / "manifest.json").string(),
                        dir_manifest.dump(2) + "\n");

        reports.emplace_back(to_string(v), aggregate(runs, labels, bio));
        if (v == LabelVariant::shuffled) {
            shuffled_runs = runs;
            shuffled_set = labels;
        }
    }

    json out = {{"task", to_string(dataset.task)}, {"variants", json::array()}};
    for (const auto& [name, rep] : reports) {
        out["variants"].push_back({{"name", name}, {"report", report_json(rep)}});
    }

    if (reports.size() >= 2) {
        const auto cmp = label_set_comparison(reports);
        out["comparison"] = {{"variants", cmp.variants},
                             {"delta", cmp.delta},
                             {"rho", spearman_json(cmp.rho)}};
    } else {
        out["comparison"] = {{"variants", json::array({reports[0].first})},
                             {"delta", json::array({json::array({0.0})})},
                             {"rho", json::array({json::array(
                                         {json{{"rho", 1.0}, {"p", 0.0}}})})}};
    }

    if (!shuffled_runs.empty()) {
        const auto tle = true_label_error_fraction(shuffled_runs, shuffled_set, original);
        out["true_label_errors"] = {{"overall", tle.overall},
                                    {"errors", tle.errors},
                                    {"true_label_errors", tle.true_label_errors},
                                    {"per_gold_class", tle.per_gold_class}};
    }

    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "ablation.json").string(), out.dump(2) + "\n");

    std::ostringstream csv;
    csv << "row\\column";
    for (const auto& [name, rep] : reports) {
        (void)rep;
        csv << ',' << name;
    }
    csv << '\n';
    for (size_t i = 0; i < reports.size(); ++i) {
        csv << reports[i].first;
        for (size_t j = 0; j < reports.size(); ++j) {
            csv << ',' << (reports[j].second.mean - reports[i].second.mean);
        }
        csv << '\n';
    }
    write_text_file((fs::path(out_dir) / "deltas.csv").string(), csv.str());
    return out;
}

std::vector<std::string> list_shards(const std::string& corpus_dir) {
    if (!fs::is_directory(corpus_dir)) {
        throw ConfigError("corpus dir not readable: " + corpus_dir);
    }
    std::vector<std::string> shards;
    for (const auto& entry : fs::directory_iterator(corpus_dir)) {
        if (entry.is_regular_file()) {
            shards.push_back(entry.path().string());
        }
    }
    std::sort(shards.begin(), shards.end());
    return shards;
}

json cmd_scan(const std::string& corpus_dir, Task task, const std::string& dataset_manifest,
              const std::string& out_dir, const ScanCommandOptions& options) {
    const auto shards = list_shards(corpus_dir);
    const TaskDataset dataset = [&] {
        try {
            return load_dataset(dataset_manifest);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("dataset: ") + e.what());
        }
    }();
    const LabelSet labels = task == Task::CHUNK
                                ? original_labels(task, dataset.label_inventory)
                                : original_labels(task);
    const auto patterns = patterns_for_task(task, labels);

    const ScanReport report = scan(shards, patterns, options.scan);
    const auto leakage = leakage_check(shards, dataset.test, options.scan.workers);

    json out = {{"task", to_string(task)},
                {"shards", shards},
                {"bytes_scanned", report.bytes_scanned},
                {"seconds", report.seconds},
                {"throughput_mb_s",
                 report.seconds > 0.0
                     ? static_cast<double>(report.bytes_scanned) / 1e6 / report.seconds
                     : 0.0},
                {"invalid_utf8_sequences", report.invalid_utf8_sequences},
                {"skipped_shards", report.skipped_shards}};
    json label_stats;
    for (const auto& [label, stats] : report.labels) {
        label_stats[label] = {{"total", stats.total},
                              {"ud_format", stats.ud_format},
                              {"ud_fraction", stats.ud_fraction()}};
    }
    out["labels"] = label_stats;
    json leak = json::array();
    for (const auto& match : leakage) {
        leak.push_back(
            {{"kind", match.kind == LeakageMatch::Kind::text_substring ? "text_substring"
                                                                       : "conllu_lines"},
             {"shard", shards[match.shard]},
             {"offset", match.offset},
             {"sentence_id", match.sentence_id}});
    }
    out["leakage"] = leak;

    if (options.attribute && !options.reference_manifests.empty()) {
        std::vector<TaskDataset> owned;
        owned.reserve(options.reference_manifests.size());
        std::vector<std::pair<std::string, const TaskDataset*>> refs;
        for (const auto& path : options.reference_manifests) {
            owned.push_back(load_dataset(path));
            refs.emplace_back(fs::path(path).stem().string(), &owned.back());
        }
        std::vector<std::vector<std::string>> hit_tokens;
        for (const auto& [label, samples] : report.samples) {
            (void)label;
            for (const auto& s : samples) {
                const std::string text = load_shard(shards[s.shard]);
                auto tokens = extract_ud_tokens_at(text, s.offset);
                if (!tokens.empty()) {
                    hit_tokens.push_back(std::move(tokens));
                }
            }
        }
        const auto attr = treebank_attribution(hit_tokens, refs);
        json counts = json::array();
        for (const auto& [key, n] : attr.counts) {
            counts.push_back({{"treebank", key.first}, {"split", key.second}, {"count", n}});
        }
        out["attribution"] = {{"counts", counts},
                              {"unattributed", attr.unattributed},
                              {"ambiguous", attr.ambiguous}};
    }

    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "scan_report.json").string(), out.dump(2) + "\n");

    // Review file for the manual-relevance pass: one block per sample.
    std::ostringstream review;
    for (const auto& [label, samples] : report.samples) {
        for (const auto& s : samples) {
            review << "label: " << label << "\nshard: " << shards[s.shard]
                   << "\noffset: " << s.offset << "\n---\n"
                   << s.window << "\n===\n";
        }
    }
    write_text_file((fs::path(out_dir) / "samples.txt").string(), review.str());
    return out;
}

} // namespace stag
