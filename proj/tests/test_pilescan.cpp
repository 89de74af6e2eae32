#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "stag/pilescan.hpp"
#include "stag/rng.hpp"

using namespace stag;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("stag_scan_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

bool scan_is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Naive single-pass counting oracle, sharing no code with scan_text.
uint64_t brute_count(const std::string& text, const ScanPattern& p) {
    const std::string needle = p.mode == ScanPattern::Mode::tab_anchored
                                   ? "\t" + p.label + "\t"
                                   : p.label;
    uint64_t n = 0;
    for (size_t i = 0; i + needle.size() <= text.size(); ++i) {
        if (text.compare(i, needle.size(), needle) != 0) {
            continue;
        }
        if (p.mode == ScanPattern::Mode::space_token) {
            const bool l = i == 0 || scan_is_space(text[i - 1]);
            const size_t a = i + needle.size();
            const bool r = a >= text.size() || scan_is_space(text[a]);
            if (!(l && r)) {
                continue;
            }
        }
        ++n;
    }
    return n;
}

std::string ud_row(const std::string& word, const std::string& upos) {
    return "1\t" + word + "\t" + word + "\t" + upos + "\tX\t_\t0\tdep\t_\t_";
}

} // namespace

TEST_CASE("ud_format_line heuristic") {
    CHECK(ud_format_line(ud_row("and", "CCONJ"), "CCONJ"));
    CHECK_FALSE(ud_format_line("and\tCCONJ", "CCONJ"));                // too few fields
    CHECK_FALSE(ud_format_line(ud_row("and", "CCONJ"), "NOUN"));      // wrong label
    CHECK_FALSE(ud_format_line("a\tb\tc\td\te\tf\tg\th", "CCONJ"));   // label not at index 3
    CHECK(ud_format_line("a\tb\tc\tCCONJ\te\tf\tg\th", "CCONJ"));     // exactly 8 fields
}

TEST_CASE("patterns_for_task modes and single-char exclusion") {
    const auto pos = patterns_for_task(Task::POS, original_labels(Task::POS));
    CHECK(pos.size() == 16); // "X" excluded
    for (const auto& p : pos) {
        CHECK(p.mode == ScanPattern::Mode::tab_anchored);
        CHECK(p.label != "X");
    }
    const auto ner = patterns_for_task(Task::NER, original_labels(Task::NER));
    CHECK(ner.size() == 8); // "O" excluded
    for (const auto& p : ner) {
        CHECK(p.mode == ScanPattern::Mode::space_token);
    }
}

TEST_CASE("planted corpus: totals and UD-format counts") {
    // 7 tab-anchored CCONJ hits, 3 of them on 10-column treebank rows
    std::string text = "plain prose line\n";
    for (int i = 0; i < 3; ++i) {
        text += ud_row("and", "CCONJ") + "\n";
    }
    for (int i = 0; i < 4; ++i) {
        text += "x\tCCONJ\ty\n"; // tab-anchored but not UD shaped
    }
    ScanReport rep;
    scan_text(text, 0, {{"CCONJ", ScanPattern::Mode::tab_anchored}}, ScanOptions{}, rep);
    CHECK(rep.labels.at("CCONJ").total == 7);
    CHECK(rep.labels.at("CCONJ").ud_format == 3);
    CHECK(rep.labels.at("CCONJ").ud_fraction() == doctest::Approx(3.0 / 7.0));
    CHECK(rep.bytes_scanned == text.size());
}

TEST_CASE("empty corpus reports zero for every requested label") {
    ScanReport rep;
    scan_text("", 0, {{"CCONJ", ScanPattern::Mode::tab_anchored}}, ScanOptions{}, rep);
    CHECK(rep.labels.at("CCONJ").total == 0);
    CHECK(rep.samples.at("CCONJ").empty());
}

TEST_CASE("space_token matching respects token boundaries") {
    const std::string text = "saw B-PER at XB-PERY and B-PERX then B-PER\n B-PER";
    ScanReport rep;
    scan_text(text, 0, {{"B-PER", ScanPattern::Mode::space_token}}, ScanOptions{}, rep);
    CHECK(rep.labels.at("B-PER").total == 3); // embedded occurrences excluded
}

TEST_CASE("context windows surround the hit") {
    const std::string text = "aaaaaaaaaa NOUN bbbbbbbbbb";
    ScanOptions opt;
    opt.window = 4;
    ScanReport rep;
    scan_text(text, 0, {{"NOUN", ScanPattern::Mode::space_token}}, opt, rep);
    REQUIRE(rep.samples.at("NOUN").size() == 1);
    // 4 characters of context on each side of the "NOUN" occurrence
    CHECK(rep.samples.at("NOUN")[0].window == "aaa NOUN bbb");
    CHECK(rep.samples.at("NOUN")[0].offset == 11);
}

TEST_CASE("counts match a brute-force oracle on random corpora") {
    Rng rng(61);
    const std::vector<ScanPattern> patterns = {
        {"CCONJ", ScanPattern::Mode::tab_anchored},
        {"NOUN", ScanPattern::Mode::tab_anchored},
        {"B-PER", ScanPattern::Mode::space_token},
    };
    for (int trial = 0; trial < 10; ++trial) {
        std::string text;
        const std::vector<std::string> pieces = {
            "CCONJ", "NOUN", "B-PER", "xB-PER", "word", "\t", " ", "\n", "CCONJ\t"};
        const size_t n = 200 + rng.below(400);
        for (size_t i = 0; i < n; ++i) {
            text += pieces[rng.below(pieces.size())];
        }
        ScanReport rep;
        scan_text(text, 0, patterns, ScanOptions{}, rep);
        for (const auto& p : patterns) {
            CHECK(rep.labels.at(p.label).total == brute_count(text, p));
        }
    }
}

TEST_CASE("shard scanning: formats, skipping, worker determinism") {
    const auto dir = temp_dir("shards");
    const std::string planted = ud_row("and", "CCONJ") + "\nfiller and more\n";

    write_file(dir / "a.txt", planted + planted);
    // gzip shard
    {
        gzFile f = gzopen((dir / "b.txt.gz").string().c_str(), "wb");
        REQUIRE(f != nullptr);
        gzwrite(f, planted.data(), static_cast<unsigned>(planted.size()));
        gzclose(f);
    }
    // JSON-lines shard with embedded text
    write_file(dir / "c.jsonl",
               nlohmann::json{{"text", planted}}.dump() + "\n" +
                   nlohmann::json{{"text", "no hits here"}}.dump() + "\n");

    std::vector<std::string> shards = {(dir / "a.txt").string(), (dir / "b.txt.gz").string(),
                                       (dir / "c.jsonl").string(),
                                       (dir / "missing.txt").string()};
    const std::vector<ScanPattern> patterns = {{"CCONJ", ScanPattern::Mode::tab_anchored}};

    ScanOptions opt;
    opt.seed = 3;
    const auto serial = scan_serial(shards, patterns, opt);
    CHECK(serial.labels.at("CCONJ").total == 4);
    CHECK(serial.labels.at("CCONJ").ud_format == 4);
    REQUIRE(serial.skipped_shards.size() == 1);
    CHECK(serial.skipped_shards[0] == shards[3]);

    for (int workers : {2, 4, 8}) {
        ScanOptions par = opt;
        par.workers = workers;
        const auto rep = scan(shards, patterns, par);
        CHECK(rep.labels.at("CCONJ").total == serial.labels.at("CCONJ").total);
        CHECK(rep.labels.at("CCONJ").ud_format == serial.labels.at("CCONJ").ud_format);
        REQUIRE(rep.samples.at("CCONJ").size() == serial.samples.at("CCONJ").size());
        for (size_t i = 0; i < rep.samples.at("CCONJ").size(); ++i) {
            CHECK(rep.samples.at("CCONJ")[i].shard == serial.samples.at("CCONJ")[i].shard);
            CHECK(rep.samples.at("CCONJ")[i].offset == serial.samples.at("CCONJ")[i].offset);
        }
        CHECK(rep.skipped_shards == serial.skipped_shards);
    }
}

TEST_CASE("sample cap is respected and seed changes the sample") {
    std::string text;
    for (int i = 0; i < 100; ++i) {
        text += "x\tCCONJ\ty\n";
    }
    ScanOptions a;
    a.sample_cap = 10;
    a.seed = 1;
    ScanReport ra;
    scan_text(text, 0, {{"CCONJ", ScanPattern::Mode::tab_anchored}}, a, ra);
    CHECK(ra.labels.at("CCONJ").total == 100);
    CHECK(ra.samples.at("CCONJ").size() == 10);

    ScanOptions b = a;
    b.seed = 2;
    ScanReport rb;
    scan_text(text, 0, {{"CCONJ", ScanPattern::Mode::tab_anchored}}, b, rb);
    std::set<size_t> oa, ob;
    for (const auto& s : ra.samples.at("CCONJ")) oa.insert(s.offset);
    for (const auto& s : rb.samples.at("CCONJ")) ob.insert(s.offset);
    CHECK(oa != ob);
}

TEST_CASE("reservoir inclusion is uniform over hits") {
    std::string text;
    for (int i = 0; i < 100; ++i) {
        text += "x\tCCONJ\ty\n";
    }
    const std::vector<ScanPattern> patterns = {{"CCONJ", ScanPattern::Mode::tab_anchored}};
    std::map<size_t, size_t> inclusion;
    const size_t trials = 10000;
    for (size_t t = 0; t < trials; ++t) {
        ScanOptions opt;
        opt.sample_cap = 10;
        opt.seed = t + 1;
        opt.window = 0;
        ScanReport rep;
        scan_text(text, 0, patterns, opt, rep);
        for (const auto& s : rep.samples.at("CCONJ")) {
            inclusion[s.offset]++;
        }
    }
    CHECK(inclusion.size() == 100);
    // p = cap/hits = 0.1; binomial sd over 10k trials ~ 0.003. A 4-sigma
    // band keeps the 100 simultaneous checks comfortably inside.
    for (const auto& [offset, n] : inclusion) {
        const double freq = static_cast<double>(n) / static_cast<double>(trials);
        CHECK(freq > 0.1 - 4 * 0.003);
        CHECK(freq < 0.1 + 4 * 0.003);
    }
}

TEST_CASE("invalid UTF-8 is counted, scanning continues") {
    std::string text = "ok \xff\xfe text\tCCONJ\tmore";
    ScanReport rep;
    scan_text(text, 0, {{"CCONJ", ScanPattern::Mode::tab_anchored}}, ScanOptions{}, rep);
    CHECK(rep.invalid_utf8_sequences == 2);
    CHECK(rep.labels.at("CCONJ").total == 1);
}

TEST_CASE("leakage detector (a): verbatim sentence substring") {
    const std::vector<TaggedSentence> test_set = {
        testutil::sent("t1", {"The", "quick", "fox"}, {"DET", "ADJ", "NOUN"}),
        testutil::sent("t2", {"hello", "world"}, {"INTJ", "NOUN"}),
    };
    SUBCASE("planted positive, whitespace-normalized") {
        const std::string text = "intro text The  quick\nfox outro";
        const auto m = leakage_check_text(text, 2, test_set);
        REQUIRE(m.size() == 1);
        CHECK(m[0].kind == LeakageMatch::Kind::text_substring);
        CHECK(m[0].sentence_id == "t1");
        CHECK(m[0].shard == 2);
        CHECK(m[0].offset == 11); // position of "The" in the raw text
    }
    SUBCASE("planted negative") {
        CHECK(leakage_check_text("The slow fox and hello there world", 0, test_set).empty());
    }
}

TEST_CASE("leakage detector (b): three consecutive treebank lines") {
    const std::vector<TaggedSentence> test_set = {
        testutil::sent("t1", {"Dogs", "chase", "cats", "often"},
                       {"NOUN", "VERB", "NOUN", "ADV"})};
    auto line = [](const std::string& w, const std::string& t) {
        return "9\t" + w + "\t_\t" + t + "\t_\t_\t0\t_\t_\t_\n";
    };
    SUBCASE("three consecutive token lines trigger a match") {
        const std::string text = "prose\n" + line("chase", "VERB") + line("cats", "NOUN") +
                                 line("often", "ADV") + "more prose\n";
        const auto m = leakage_check_text(text, 0, test_set);
        REQUIRE(m.size() == 1);
        CHECK(m[0].kind == LeakageMatch::Kind::conllu_lines);
        CHECK(m[0].sentence_id == "t1");
        CHECK(m[0].offset == 6); // start of the first matching line
    }
    SUBCASE("two consecutive lines are not enough") {
        const std::string text = line("Dogs", "NOUN") + line("chase", "VERB") + "break\n" +
                                 line("cats", "NOUN") + line("often", "ADV");
        CHECK(leakage_check_text(text, 0, test_set).empty());
    }
    SUBCASE("non-consecutive tokens do not chain") {
        const std::string text =
            line("Dogs", "NOUN") + line("cats", "NOUN") + line("often", "ADV");
        CHECK(leakage_check_text(text, 0, test_set).empty());
    }
}

TEST_CASE("leakage_check over shards matches per-shard results") {
    const auto dir = temp_dir("leak");
    const std::vector<TaggedSentence> test_set = {
        testutil::sent("t1", {"unique", "planted", "sentence"}, {"ADJ", "VERB", "NOUN"})};
    write_file(dir / "a.txt", "nothing here\n");
    write_file(dir / "b.txt", "xx unique planted sentence yy\n");
    const std::vector<std::string> shards = {(dir / "a.txt").string(),
                                             (dir / "b.txt").string()};
    for (int workers : {1, 4}) {
        const auto m = leakage_check(shards, test_set, workers);
        REQUIRE(m.size() == 1);
        CHECK(m[0].shard == 1);
        CHECK(m[0].sentence_id == "t1");
    }
    CHECK_THROWS(leakage_check(shards, {}, 1));
}

TEST_CASE("extract_ud_tokens_at returns the surrounding block") {
    const std::string text = "prose line\n" + ud_row("The", "DET") + "\n" +
                             ud_row("fox", "NOUN") + "\n" + ud_row("ran", "VERB") +
                             "\nprose again\n";
    const size_t hit = text.find("\tNOUN\t");
    const auto tokens = extract_ud_tokens_at(text, hit);
    CHECK(tokens == (std::vector<std::string>{"The", "fox", "ran"}));
    CHECK(extract_ud_tokens_at("no treebank rows at all", 4).empty());
}

TEST_CASE("treebank attribution") {
    const auto bank1 = make_dataset(
        Task::POS, {testutil::sent("a", {"The", "fox", "ran"}, {"DET", "NOUN", "VERB"})},
        {testutil::sent("b", {"Cats", "sleep"}, {"NOUN", "VERB"})});
    const auto bank2 = make_dataset(
        Task::POS, {testutil::sent("c", {"The", "fox", "ran"}, {"DET", "NOUN", "VERB"})},
        {testutil::sent("d", {"Unrelated", "text"}, {"ADJ", "NOUN"})});

    const std::vector<std::vector<std::string>> hits = {
        {"The", "fox", "ran"}, // in both banks -> ambiguous
        {"Cats", "sleep"},     // bank1 test only
        {"Novel", "words"},    // nowhere
    };
    const auto res = treebank_attribution(
        hits, {{"ewt", &bank1}, {"gum", &bank2}});
    CHECK(res.counts.at({"ewt", "train"}) == 1);
    CHECK(res.counts.at({"gum", "train"}) == 1);
    CHECK(res.counts.at({"ewt", "test"}) == 1);
    CHECK(res.unattributed == 1);
    CHECK(res.ambiguous == 1);
}
