#include "stag/corpus.hpp"

#include <zlib.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "stag/rng.hpp"

namespace stag {

namespace {

std::vector<std::string> split_char(const std::string& s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    for (;;) {
        const size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> split_spaces(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) {
        out.push_back(tok);
    }
    return out;
}

[[noreturn]] void parse_fail(size_t lineno, const std::string& msg) {
    throw ParseError("line " + std::to_string(lineno) + ": " + msg);
}

} // namespace

std::string read_file_maybe_gzip(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb"); // reads plain files transparently
    if (!f) {
        throw std::runtime_error("cannot open file: " + path);
    }
    std::string out;
    char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof(buf))) > 0) {
        out.append(buf, static_cast<size_t>(n));
    }
    const bool bad = n < 0;
    gzclose(f);
    if (bad) {
        throw std::runtime_error("read error (gzip?): " + path);
    }
    return out;
}

std::vector<TaggedSentence> parse_conllu(const std::string& text) {
    std::vector<TaggedSentence> sentences;
    TaggedSentence cur;
    std::string pending_id;

    auto flush = [&]() {
        if (!cur.words.empty()) {
            cur.sentence_id =
                pending_id.empty() ? "s" + std::to_string(sentences.size() + 1) : pending_id;
            sentences.push_back(std::move(cur));
        }
        cur = TaggedSentence{};
        pending_id.clear();
    };

    size_t lineno = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            flush();
            continue;
        }
        if (line[0] == '#') {
            const std::string key = "# sent_id = ";
            if (line.rfind(key, 0) == 0) {
                pending_id = line.substr(key.size());
            }
            continue;
        }
        const auto cols = split_char(line, '\t');
        if (cols.size() != 10) {
            parse_fail(lineno, "expected 10 tab-separated columns, got " +
                                   std::to_string(cols.size()));
        }
        const std::string& id = cols[0];
        if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) {
            continue; // multiword-token range or empty node
        }
        cur.words.push_back(cols[1]);
        cur.gold_tags.push_back(cols[3]);
    }
    flush();
    if (sentences.empty()) {
        throw ParseError("no sentences found in CoNLL-U input");
    }
    return sentences;
}

std::vector<TaggedSentence> parse_conll_columns(const std::string& text, size_t tag_column) {
    std::vector<TaggedSentence> sentences;
    TaggedSentence cur;
    size_t ncols = 0; // column count fixed by first token line

    auto flush = [&]() {
        if (!cur.words.empty()) {
            cur.sentence_id = "s" + std::to_string(sentences.size() + 1);
            sentences.push_back(std::move(cur));
        }
        cur = TaggedSentence{};
    };

    size_t lineno = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto cols = split_spaces(line);
        if (cols.empty()) {
            flush();
            continue;
        }
        if (cols[0] == "-DOCSTART-") {
            flush();
            continue;
        }
        if (ncols == 0) {
            ncols = cols.size();
            if (tag_column >= ncols) {
                parse_fail(lineno, "tag column " + std::to_string(tag_column) +
                                       " out of range for " + std::to_string(ncols) +
                                       " columns");
            }
        } else if (cols.size() != ncols) {
            parse_fail(lineno, "inconsistent column count: expected " +
                                   std::to_string(ncols) + ", got " +
                                   std::to_string(cols.size()));
        }
        cur.words.push_back(cols[0]);
        cur.gold_tags.push_back(cols[tag_column]);
    }
    flush();
    if (sentences.empty()) {
        throw ParseError("no sentences found in column input");
    }
    return sentences;
}

std::string serialize_conllu(const std::vector<TaggedSentence>& sentences) {
    std::ostringstream out;
    for (const auto& s : sentences) {
        out << "# sent_id = " << s.sentence_id << "\n";
        for (size_t i = 0; i < s.words.size(); ++i) {
            out << (i + 1) << '\t' << s.words[i] << "\t_\t" << s.gold_tags[i]
                << "\t_\t_\t0\t_\t_\t_\n";
        }
        out << "\n";
    }
    return out.str();
}

std::string serialize_conll_columns(const std::vector<TaggedSentence>& sentences,
                                    size_t tag_column) {
    std::ostringstream out;
    for (const auto& s : sentences) {
        for (size_t i = 0; i < s.words.size(); ++i) {
            out << s.words[i];
            for (size_t c = 1; c <= tag_column; ++c) {
                out << ' ' << (c == tag_column ? s.gold_tags[i] : "_");
            }
            out << '\n';
        }
        out << '\n';
    }
    return out.str();
}

TaskDataset make_dataset(Task task, std::vector<TaggedSentence> train,
                         std::vector<TaggedSentence> test) {
    TaskDataset ds;
    ds.task = task;
    ds.train = std::move(train);
    ds.test = std::move(test);

    std::set<std::string> train_ids;
    for (const auto& s : ds.train) {
        train_ids.insert(s.sentence_id);
    }
    bool clash = false;
    for (const auto& s : ds.test) {
        if (train_ids.count(s.sentence_id)) {
            clash = true;
            break;
        }
    }
    if (clash) {
        // Formats without native ids number each split independently.
        for (auto& s : ds.train) s.sentence_id = "train/" + s.sentence_id;
        for (auto& s : ds.test) s.sentence_id = "test/" + s.sentence_id;
    }

    std::set<std::string> seen;
    for (const auto* split : {&ds.train, &ds.test}) {
        for (const auto& s : *split) {
            for (const auto& t : s.gold_tags) {
                if (seen.insert(t).second) {
                    ds.label_inventory.push_back(t);
                }
            }
        }
    }
    return ds;
}

TaskDataset load_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) {
        throw std::runtime_error("cannot open dataset manifest: " + manifest_path);
    }
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("manifest line is not key=value: " + line);
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* key : {"task", "train_path", "test_path"}) {
        if (!kv.count(key)) {
            throw std::runtime_error(std::string("dataset manifest missing key: ") + key);
        }
    }
    const Task task = task_from_string(kv.at("task"));
    const auto base = std::filesystem::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    auto parse_split = [&](const std::string& path) {
        const std::string text = read_file_maybe_gzip(resolve(path));
        if (task == Task::POS) {
            return parse_conllu(text);
        }
        size_t tag_column = task == Task::CHUNK ? 2 : 3;
        if (kv.count("tag_column")) {
            tag_column = static_cast<size_t>(std::stoul(kv.at("tag_column")));
        }
        return parse_conll_columns(text, tag_column);
    };
    return make_dataset(task, parse_split(kv.at("train_path")), parse_split(kv.at("test_path")));
}

DemonstrationSet sample_demonstrations(const TaskDataset& dataset, size_t k, uint64_t seed,
                                       size_t max_attempts) {
    if (k > dataset.train.size()) {
        throw std::invalid_argument("sample_demonstrations: k exceeds train size");
    }
    DemonstrationSet out;
    out.k = k;
    out.seed = seed;
    if (k == 0) {
        return out;
    }
    const std::set<std::string> full(dataset.label_inventory.begin(),
                                     dataset.label_inventory.end());
    Rng rng(seed);
    std::vector<size_t> best;
    size_t best_coverage = 0;
    if (max_attempts == 0) {
        max_attempts = 1;
    }
    for (size_t attempt = 0; attempt < max_attempts; ++attempt) {
        const auto idx = rng.sample_without_replacement(dataset.train.size(), k);
        std::set<std::string> covered;
        for (size_t i : idx) {
            for (const auto& t : dataset.train[i].gold_tags) {
                covered.insert(t);
            }
        }
        if (covered.size() > best_coverage) {
            best_coverage = covered.size();
            best = idx;
        }
        if (covered == full) {
            break;
        }
    }
    for (size_t i : best) {
        out.sentences.push_back(dataset.train[i]);
        for (const auto& t : dataset.train[i].gold_tags) {
            out.covered_labels.insert(t);
        }
    }
    return out;
}

std::vector<TaggedSentence> sample_eval_subset(const TaskDataset& dataset, size_t n,
                                               uint64_t seed) {
    if (n > dataset.test.size()) {
        throw std::invalid_argument("sample_eval_subset: n exceeds test size");
    }
    Rng rng(seed);
    std::vector<TaggedSentence> out;
    out.reserve(n);
    for (size_t i : rng.sample_without_replacement(dataset.test.size(), n)) {
        out.push_back(dataset.test[i]);
    }
    return out;
}

} // namespace stag
