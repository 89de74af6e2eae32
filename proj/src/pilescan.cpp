#include "stag/pilescan.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json.hpp"
#include "stag/rng.hpp"

namespace stag {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::vector<std::string> split_tabs(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    for (;;) {
        const size_t tab = s.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, tab - start));
        start = tab + 1;
    }
    return out;
}

std::pair<size_t, size_t> line_bounds(const std::string& text, size_t pos) {
    size_t start = text.rfind('\n', pos);
    start = start == std::string::npos ? 0 : start + 1;
    size_t end = text.find('\n', pos);
    end = end == std::string::npos ? text.size() : end;
    return {start, end};
}

// Counts malformed UTF-8 sequences; scanning proceeds regardless since the
// patterns themselves are ASCII.
uint64_t count_invalid_utf8(const std::string& s) {
    uint64_t bad = 0;
    size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        size_t len;
        if (c < 0x80) {
            len = 1;
        } else if ((c >> 5) == 0x6) {
            len = 2;
        } else if ((c >> 4) == 0xe) {
            len = 3;
        } else if ((c >> 3) == 0x1e) {
            len = 4;
        } else {
            ++bad;
            ++i;
            continue;
        }
        bool ok = i + len <= s.size();
        for (size_t j = 1; ok && j < len; ++j) {
            ok = (static_cast<unsigned char>(s[i + j]) >> 6) == 0x2;
        }
        if (!ok) {
            ++bad;
            ++i;
        } else {
            i += len;
        }
    }
    return bad;
}

void reservoir_push(std::vector<ContextSample>& samples, ContextSample sample, size_t cap) {
    if (cap == 0) {
        return;
    }
    samples.push_back(std::move(sample));
    if (samples.size() <= cap) {
        return;
    }
    // Keep the cap smallest priorities; ties fall back to position so the
    // result is independent of insertion order.
    auto cmp = [](const ContextSample& a, const ContextSample& b) {
        return std::tie(a.priority, a.shard, a.offset) < std::tie(b.priority, b.shard, b.offset);
    };
    const auto worst = std::max_element(samples.begin(), samples.end(), cmp);
    samples.erase(worst);
}

void merge_reports(ScanReport& into, const ScanReport& from, size_t cap) {
    for (const auto& [label, stats] : from.labels) {
        into.labels[label].total += stats.total;
        into.labels[label].ud_format += stats.ud_format;
    }
    for (const auto& [label, samples] : from.samples) {
        for (const auto& s : samples) {
            reservoir_push(into.samples[label], s, cap);
        }
    }
    into.skipped_shards.insert(into.skipped_shards.end(), from.skipped_shards.begin(),
                               from.skipped_shards.end());
    into.invalid_utf8_sequences += from.invalid_utf8_sequences;
    into.bytes_scanned += from.bytes_scanned;
}

void sort_samples(ScanReport& report) {
    for (auto& [label, samples] : report.samples) {
        std::sort(samples.begin(), samples.end(),
                  [](const ContextSample& a, const ContextSample& b) {
                      return std::tie(a.shard, a.offset) < std::tie(b.shard, b.offset);
                  });
    }
}

} // namespace

bool ud_format_line(const std::string& line, const std::string& label) {
    const auto fields = split_tabs(line);
    return fields.size() >= 8 && fields[3] == label;
}

std::vector<ScanPattern> patterns_for_task(Task task, const LabelSet& labels) {
    std::vector<ScanPattern> out;
    const auto mode =
        task == Task::POS ? ScanPattern::Mode::tab_anchored : ScanPattern::Mode::space_token;
    for (const auto& cls : labels.classes) {
        const std::string& surface = labels.surface(cls);
        if (surface.size() < 2) {
            continue; // single characters match far too often to be useful
        }
        out.push_back(ScanPattern{surface, mode});
    }
    return out;
}

std::string load_shard(const std::string& path) {
    std::string text = read_file_maybe_gzip(path);
    std::string stem = path;
    if (stem.size() > 3 && stem.ends_with(".gz")) {
        stem.resize(stem.size() - 3);
    }
    if (!stem.ends_with(".jsonl")) {
        return text;
    }
    // Pile-style JSON lines: scan the concatenated "text" fields.
    std::string out;
    size_t start = 0;
    while (start < text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            end = text.size();
        }
        const std::string line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) {
            continue;
        }
        const auto doc = nlohmann::json::parse(line);
        out += doc.at("text").get<std::string>();
        out += '\n';
    }
    return out;
}

void scan_text(const std::string& text, size_t shard_index,
               const std::vector<ScanPattern>& patterns, const ScanOptions& options,
               ScanReport& into) {
    into.invalid_utf8_sequences += count_invalid_utf8(text);
    into.bytes_scanned += text.size();
    for (const auto& pattern : patterns) {
        if (pattern.label.empty()) {
            throw std::invalid_argument("scan: empty pattern label");
        }
        auto& stats = into.labels[pattern.label];
        into.samples[pattern.label]; // report every requested label, even at 0
        const std::string needle = pattern.mode == ScanPattern::Mode::tab_anchored
                                       ? "\t" + pattern.label + "\t"
                                       : pattern.label;
        const uint64_t label_seed =
            options.seed ^ hash_bytes(0x5ca9ab1eULL, pattern.label.data(), pattern.label.size());
        size_t pos = 0;
        while ((pos = text.find(needle, pos)) != std::string::npos) {
            bool hit = true;
            if (pattern.mode == ScanPattern::Mode::space_token) {
                const bool left_ok = pos == 0 || is_space(text[pos - 1]);
                const size_t after = pos + needle.size();
                const bool right_ok = after >= text.size() || is_space(text[after]);
                hit = left_ok && right_ok;
            }
            if (hit) {
                ++stats.total;
                if (pattern.mode == ScanPattern::Mode::tab_anchored) {
                    const auto [ls, le] = line_bounds(text, pos);
                    if (ud_format_line(text.substr(ls, le - ls), pattern.label)) {
                        ++stats.ud_format;
                    }
                }
                ContextSample sample;
                sample.label = pattern.label;
                sample.shard = shard_index;
                sample.offset = pos;
                const uint64_t key[2] = {static_cast<uint64_t>(shard_index),
                                         static_cast<uint64_t>(pos)};
                sample.priority = hash_bytes(label_seed, key, sizeof(key));
                const size_t from = pos > options.window ? pos - options.window : 0;
                const size_t to = std::min(text.size(), pos + needle.size() + options.window);
                sample.window = text.substr(from, to - from);
                reservoir_push(into.samples[pattern.label], std::move(sample),
                               options.sample_cap);
            }
            ++pos;
        }
    }
}

ScanReport scan_serial(const std::vector<std::string>& shard_paths,
                       const std::vector<ScanPattern>& patterns, const ScanOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    ScanReport report;
    for (size_t i = 0; i < shard_paths.size(); ++i) {
        try {
            const std::string text = load_shard(shard_paths[i]);
            scan_text(text, i, patterns, options, report);
        } catch (const std::exception&) {
            report.skipped_shards.push_back(shard_paths[i]);
        }
    }
    sort_samples(report);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

ScanReport scan(const std::vector<std::string>& shard_paths,
                const std::vector<ScanPattern>& patterns, const ScanOptions& options) {
    if (options.workers <= 1) {
        return scan_serial(shard_paths, patterns, options);
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<ScanReport> partial(shard_paths.size());
#pragma omp parallel for schedule(dynamic) num_threads(options.workers)
    for (long i = 0; i < static_cast<long>(shard_paths.size()); ++i) {
        try {
            const std::string text = load_shard(shard_paths[i]);
            scan_text(text, static_cast<size_t>(i), patterns, options, partial[i]);
        } catch (const std::exception&) {
            partial[i].skipped_shards.push_back(shard_paths[i]);
        }
    }
    ScanReport report;
    for (const auto& p : partial) { // merge in shard order: deterministic
        merge_reports(report, p, options.sample_cap);
    }
    sort_samples(report);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

namespace {

// Whitespace-normalized copy plus a map back to original offsets.
void normalize_ws(const std::string& text, std::string& out, std::vector<size_t>& offsets) {
    out.clear();
    offsets.clear();
    bool in_space = true; // leading whitespace dropped
    for (size_t i = 0; i < text.size(); ++i) {
        if (is_space(text[i])) {
            if (!in_space) {
                out.push_back(' ');
                offsets.push_back(i);
                in_space = true;
            }
        } else {
            out.push_back(text[i]);
            offsets.push_back(i);
            in_space = false;
        }
    }
}

std::string detokenize(const TaggedSentence& s) {
    std::string out;
    for (size_t i = 0; i < s.words.size(); ++i) {
        if (i) {
            out += ' ';
        }
        out += s.words[i];
    }
    return out;
}

} // namespace

std::vector<LeakageMatch> leakage_check_text(const std::string& text, size_t shard_index,
                                             const std::vector<TaggedSentence>& test_set) {
    std::vector<LeakageMatch> matches;

    // Detector (a): normalized sentence text as substring.
    std::string norm;
    std::vector<size_t> offsets;
    normalize_ws(text, norm, offsets);
    for (const auto& s : test_set) {
        const std::string needle = detokenize(s);
        if (needle.empty()) {
            continue;
        }
        size_t pos = 0;
        while ((pos = norm.find(needle, pos)) != std::string::npos) {
            matches.push_back(LeakageMatch{LeakageMatch::Kind::text_substring, shard_index,
                                           offsets[pos], s.sentence_id});
            ++pos;
        }
    }

    // Detector (b): >= 3 consecutive CoNLL-U-form lines covering
    // consecutive tokens of one test sentence.
    std::map<std::string, std::vector<std::pair<size_t, size_t>>> token_index;
    for (size_t si = 0; si < test_set.size(); ++si) {
        const auto& s = test_set[si];
        for (size_t ti = 0; ti < s.words.size(); ++ti) {
            token_index[s.words[ti] + "\t" + s.gold_tags[ti]].emplace_back(si, ti);
        }
    }
    struct Run {
        size_t len;
        size_t start_offset;
        bool reported;
    };
    std::map<std::pair<size_t, size_t>, Run> active; // (sentence, last token idx)
    size_t line_start = 0;
    while (line_start < text.size()) {
        size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) {
            line_end = text.size();
        }
        const std::string line = text.substr(line_start, line_end - line_start);
        std::map<std::pair<size_t, size_t>, Run> next;
        const auto fields = split_tabs(line);
        if (fields.size() >= 4) {
            auto it = token_index.find(fields[1] + "\t" + fields[3]);
            if (it != token_index.end()) {
                for (const auto& [si, ti] : it->second) {
                    Run run{1, line_start, false};
                    if (ti > 0) {
                        auto prev = active.find({si, ti - 1});
                        if (prev != active.end()) {
                            run.len = prev->second.len + 1;
                            run.start_offset = prev->second.start_offset;
                            run.reported = prev->second.reported;
                        }
                    }
                    if (run.len >= 3 && !run.reported) {
                        matches.push_back(LeakageMatch{LeakageMatch::Kind::conllu_lines,
                                                       shard_index, run.start_offset,
                                                       test_set[si].sentence_id});
                        run.reported = true;
                    }
                    next[{si, ti}] = run;
                }
            }
        }
        active = std::move(next);
        line_start = line_end + 1;
    }

    std::sort(matches.begin(), matches.end(), [](const LeakageMatch& a, const LeakageMatch& b) {
        return std::tie(a.offset, a.sentence_id, a.kind) <
               std::tie(b.offset, b.sentence_id, b.kind);
    });
    return matches;
}

std::vector<LeakageMatch> leakage_check(const std::vector<std::string>& shard_paths,
                                        const std::vector<TaggedSentence>& test_set,
                                        int workers) {
    if (test_set.empty()) {
        throw std::invalid_argument("leakage_check: empty test set");
    }
    std::vector<std::vector<LeakageMatch>> partial(shard_paths.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, workers)) if (workers > 1)
    for (long i = 0; i < static_cast<long>(shard_paths.size()); ++i) {
        try {
            const std::string text = load_shard(shard_paths[i]);
            partial[i] = leakage_check_text(text, static_cast<size_t>(i), test_set);
        } catch (const std::exception&) {
            // unreadable shard: skipped, consistent with scan()
        }
    }
    std::vector<LeakageMatch> all;
    for (auto& p : partial) {
        all.insert(all.end(), p.begin(), p.end());
    }
    return all;
}

std::vector<std::string> extract_ud_tokens_at(const std::string& text, size_t hit_offset) {
    auto is_ud_row = [](const std::string& line) {
        const auto fields = split_tabs(line);
        return fields.size() >= 8 && !fields[0].empty();
    };
    auto [start, end] = line_bounds(text, std::min(hit_offset, text.size() ? text.size() - 1 : 0));
    if (!is_ud_row(text.substr(start, end - start))) {
        return {};
    }
    // Walk to the top of the contiguous treebank-shaped block.
    size_t block_start = start;
    while (block_start > 0) {
        const size_t prev_end = block_start - 1;
        const auto [ps, pe] = line_bounds(text, prev_end == 0 ? 0 : prev_end - 1);
        if (prev_end == 0 || !is_ud_row(text.substr(ps, pe - ps))) {
            break;
        }
        block_start = ps;
    }
    std::vector<std::string> tokens;
    size_t pos = block_start;
    while (pos < text.size()) {
        size_t le = text.find('\n', pos);
        if (le == std::string::npos) {
            le = text.size();
        }
        const std::string line = text.substr(pos, le - pos);
        if (!is_ud_row(line)) {
            break;
        }
        const auto fields = split_tabs(line);
        const std::string& id = fields[0];
        const bool plain_index =
            !id.empty() && id.find('-') == std::string::npos && id.find('.') == std::string::npos;
        if (plain_index) {
            tokens.push_back(fields[1]);
        }
        pos = le + 1;
    }
    return tokens;
}

AttributionResult treebank_attribution(
    const std::vector<std::vector<std::string>>& hit_token_sequences,
    const std::vector<std::pair<std::string, const TaskDataset*>>& treebanks) {
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> index;
    for (const auto& [name, ds] : treebanks) {
        for (const auto* split : {&ds->train, &ds->test}) {
            const std::string split_name = split == &ds->train ? "train" : "test";
            for (const auto& s : *split) {
                index[detokenize(s)].emplace_back(name, split_name);
            }
        }
    }
    AttributionResult out;
    for (const auto& tokens : hit_token_sequences) {
        std::string key;
        for (size_t i = 0; i < tokens.size(); ++i) {
            if (i) {
                key += ' ';
            }
            key += tokens[i];
        }
        auto it = index.find(key);
        if (it == index.end()) {
            ++out.unattributed;
            continue;
        }
        std::set<std::string> names;
        for (const auto& [name, split] : it->second) {
            out.counts[{name, split}]++;
            names.insert(name);
        }
        if (names.size() > 1) {
            ++out.ambiguous;
        }
    }
    return out;
}

} // namespace stag
