#include "stag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace stag {

namespace {

// Lenient BIO view for raw model output: anything unparseable counts as O.
BioTag parse_bio_lenient(const std::string& tag) {
    try {
        return parse_bio(tag);
    } catch (const std::invalid_argument&) {
        return BioTag{true, 0, ""};
    }
}

} // namespace

double token_accuracy(const std::vector<std::string>& gold,
                      const std::vector<std::string>& pred) {
    if (gold.size() != pred.size()) {
        throw std::invalid_argument("token_accuracy: length mismatch");
    }
    if (gold.empty()) {
        return 0.0;
    }
    size_t hits = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        hits += gold[i] == pred[i];
    }
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

std::vector<Span> extract_spans(const std::vector<std::string>& tags) {
    std::vector<Span> spans;
    std::optional<Span> open;
    auto close = [&]() {
        if (open) {
            spans.push_back(*open);
            open.reset();
        }
    };
    for (size_t i = 0; i < tags.size(); ++i) {
        const BioTag t = parse_bio_lenient(tags[i]);
        if (t.is_outside) {
            close();
        } else if (t.prefix == 'B') {
            close();
            open = Span{t.type, i, i};
        } else { // I-X
            if (open && open->type == t.type) {
                open->end = i;
            } else {
                // No valid opener: a new span starts here (conlleval repair).
                close();
                open = Span{t.type, i, i};
            }
        }
    }
    close();
    return spans;
}

namespace {

void check_aligned(const std::vector<std::vector<std::string>>& gold,
                   const std::vector<std::vector<std::string>>& pred) {
    if (gold.size() != pred.size()) {
        throw std::invalid_argument("span_f1: sentence count mismatch");
    }
    for (size_t i = 0; i < gold.size(); ++i) {
        if (gold[i].size() != pred[i].size()) {
            throw std::invalid_argument("span_f1: sentence " + std::to_string(i) +
                                        " length mismatch");
        }
    }
}

SpanScores micro_scores(size_t matched, size_t n_pred, size_t n_gold) {
    SpanScores s;
    s.precision = n_pred ? static_cast<double>(matched) / static_cast<double>(n_pred) : 0.0;
    s.recall = n_gold ? static_cast<double>(matched) / static_cast<double>(n_gold) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

SpanScores span_f1_impl(const std::vector<std::vector<std::string>>& gold,
                        const std::vector<std::vector<std::string>>& pred,
                        const std::string* only_type) {
    check_aligned(gold, pred);
    size_t matched = 0, n_pred = 0, n_gold = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        auto gs = extract_spans(gold[i]);
        auto ps = extract_spans(pred[i]);
        if (only_type) {
            std::erase_if(gs, [&](const Span& s) { return s.type != *only_type; });
            std::erase_if(ps, [&](const Span& s) { return s.type != *only_type; });
        }
        std::sort(gs.begin(), gs.end());
        std::sort(ps.begin(), ps.end());
        std::vector<Span> both;
        std::set_intersection(gs.begin(), gs.end(), ps.begin(), ps.end(),
                              std::back_inserter(both));
        matched += both.size();
        n_pred += ps.size();
        n_gold += gs.size();
    }
    return micro_scores(matched, n_pred, n_gold);
}

} // namespace

SpanScores span_f1(const std::vector<std::vector<std::string>>& gold,
                   const std::vector<std::vector<std::string>>& pred) {
    return span_f1_impl(gold, pred, nullptr);
}

SpanScores span_f1_for_type(const std::vector<std::vector<std::string>>& gold,
                            const std::vector<std::vector<std::string>>& pred,
                            const std::string& type) {
    return span_f1_impl(gold, pred, &type);
}

BaselineScores majority_baselines(const TaskDataset& dataset) {
    return majority_baselines(dataset, dataset.test);
}

BaselineScores majority_baselines(const TaskDataset& dataset,
                                  const std::vector<TaggedSentence>& eval) {
    if (dataset.train.empty()) {
        throw std::invalid_argument("majority_baselines: empty train split");
    }
    // Counts with first-occurrence tie-breaking, so results do not depend
    // on hash order.
    std::map<std::string, size_t> overall_counts;
    std::map<std::string, std::map<std::string, size_t>> word_counts;
    for (const auto& s : dataset.train) {
        for (size_t i = 0; i < s.words.size(); ++i) {
            overall_counts[s.gold_tags[i]]++;
            word_counts[s.words[i]][s.gold_tags[i]]++;
        }
    }
    auto rank = [&](const std::string& tag) {
        const auto it =
            std::find(dataset.label_inventory.begin(), dataset.label_inventory.end(), tag);
        return static_cast<size_t>(it - dataset.label_inventory.begin());
    };
    auto argmax = [&](const std::map<std::string, size_t>& counts) {
        std::string best;
        size_t best_count = 0;
        size_t best_rank = SIZE_MAX;
        for (const auto& [tag, count] : counts) {
            const size_t r = rank(tag);
            if (count > best_count || (count == best_count && r < best_rank)) {
                best = tag;
                best_count = count;
                best_rank = r;
            }
        }
        return best;
    };
    const std::string overall_tag = argmax(overall_counts);

    std::vector<std::vector<std::string>> gold, overall_pred, per_word_pred;
    for (const auto& s : eval) {
        gold.push_back(s.gold_tags);
        overall_pred.emplace_back(s.words.size(), overall_tag);
        std::vector<std::string> pw;
        pw.reserve(s.words.size());
        for (const auto& w : s.words) {
            auto it = word_counts.find(w);
            pw.push_back(it == word_counts.end() ? overall_tag : argmax(it->second));
        }
        per_word_pred.push_back(std::move(pw));
    }

    BaselineScores out;
    out.overall_majority_tag = overall_tag;
    const bool bio = dataset.task != Task::POS;
    auto score = [&](const std::vector<std::vector<std::string>>& pred) {
        if (bio) {
            return span_f1(gold, pred).f1;
        }
        double hits = 0, total = 0;
        for (size_t i = 0; i < gold.size(); ++i) {
            for (size_t j = 0; j < gold[i].size(); ++j) {
                hits += gold[i][j] == pred[i][j];
                ++total;
            }
        }
        return total > 0 ? hits / total : 0.0;
    };
    out.overall_majority = score(overall_pred);
    out.per_word_majority = score(per_word_pred);
    return out;
}

ConfusionMatrix confusion(const std::vector<std::string>& gold,
                          const std::vector<std::string>& pred,
                          const std::vector<std::string>& classes) {
    if (gold.size() != pred.size()) {
        throw std::invalid_argument("confusion: length mismatch");
    }
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < classes.size(); ++i) {
        index[classes[i]] = i;
    }
    ConfusionMatrix m(classes.size(), std::vector<long>(classes.size(), 0));
    for (size_t i = 0; i < gold.size(); ++i) {
        auto g = index.find(gold[i]);
        auto p = index.find(pred[i]);
        if (g == index.end()) {
            throw std::out_of_range("confusion: unknown gold class " + gold[i]);
        }
        if (p == index.end()) {
            throw std::out_of_range("confusion: unknown predicted class " + pred[i]);
        }
        m[g->second][p->second]++;
    }
    return m;
}

void accumulate_confusion(ConfusionMatrix& into, const ConfusionMatrix& from) {
    if (into.empty()) {
        into = from;
        return;
    }
    if (into.size() != from.size()) {
        throw std::invalid_argument("accumulate_confusion: shape mismatch");
    }
    for (size_t i = 0; i < from.size(); ++i) {
        for (size_t j = 0; j < from.size(); ++j) {
            into[i][j] += from[i][j];
        }
    }
}

std::vector<std::vector<double>> display_confusion(const ConfusionMatrix& counts) {
    const size_t n = counts.size();
    std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) {
        long row = 0;
        for (size_t j = 0; j < n; ++j) {
            if (j != i) {
                row += counts[i][j];
            }
        }
        if (row == 0) {
            continue; // all-zero display row when the class has no errors
        }
        for (size_t j = 0; j < n; ++j) {
            out[i][j] = j == i ? 0.0
                              : static_cast<double>(counts[i][j]) / static_cast<double>(row);
        }
    }
    return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) {
            ++j;
        }
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = a.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double num = 0, da = 0, db = 0;
    for (size_t i = 0; i < n; ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    if (da == 0.0 || db == 0.0) {
        return 0.0; // constant input: correlation undefined, report 0
    }
    return num / std::sqrt(da * db);
}

} // namespace

SpearmanResult spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("spearman: length mismatch");
    }
    const size_t n = a.size();
    if (n < 2) {
        throw std::invalid_argument("spearman: need at least 2 observations");
    }
    SpearmanResult r;
    r.rho = pearson(average_ranks(a), average_ranks(b));
    if (n < 3) {
        r.p_value = 1.0;
        return r;
    }
    const double denom = 1.0 - r.rho * r.rho;
    if (denom <= 0.0) {
        r.p_value = 0.0;
        return r;
    }
    const double t = r.rho * std::sqrt((static_cast<double>(n) - 2.0) / denom);
    boost::math::students_t dist(static_cast<double>(n) - 2.0);
    r.p_value = 2.0 * boost::math::cdf(dist, -std::abs(t));
    return r;
}

namespace {

std::vector<double> off_diagonal(const ConfusionMatrix& m) {
    std::vector<double> out;
    out.reserve(m.size() * m.size());
    for (size_t i = 0; i < m.size(); ++i) {
        for (size_t j = 0; j < m.size(); ++j) {
            if (i != j) {
                out.push_back(static_cast<double>(m[i][j]));
            }
        }
    }
    return out;
}

} // namespace

std::vector<std::vector<SpearmanResult>> confusion_spearman(
    const std::vector<ConfusionMatrix>& matrices) {
    if (matrices.size() < 2) {
        throw std::invalid_argument("confusion_spearman: need at least 2 matrices");
    }
    for (const auto& m : matrices) {
        if (m.size() != matrices[0].size()) {
            throw std::invalid_argument("confusion_spearman: shape mismatch");
        }
    }
    std::vector<std::vector<double>> flat;
    for (const auto& m : matrices) {
        flat.push_back(off_diagonal(m));
    }
    const size_t n = matrices.size();
    std::vector<std::vector<SpearmanResult>> out(n, std::vector<SpearmanResult>(n));
    for (size_t i = 0; i < n; ++i) {
        out[i][i] = SpearmanResult{1.0, 0.0};
        for (size_t j = i + 1; j < n; ++j) {
            out[i][j] = out[j][i] = spearman(flat[i], flat[j]);
        }
    }
    return out;
}

namespace {

// Per-class (or per-type for BIO) score of one run.
std::map<std::string, double> per_class_scores(const RunResult& run, const LabelSet& labels,
                                               bool bio_metric) {
    std::map<std::string, double> out;
    if (!bio_metric) {
        std::map<std::string, long> gold_n, correct_n;
        for (size_t s = 0; s < run.sentences.size(); ++s) {
            const auto& gold = run.sentences[s].gold_tags;
            const auto& pred = run.predictions[s];
            for (size_t i = 0; i < gold.size(); ++i) {
                gold_n[gold[i]]++;
                correct_n[gold[i]] += gold[i] == pred[i];
            }
        }
        for (const auto& [cls, n] : gold_n) {
            if (n > 0) {
                out[cls] = static_cast<double>(correct_n[cls]) / static_cast<double>(n);
            }
        }
    } else {
        std::vector<std::vector<std::string>> gold, pred;
        for (size_t s = 0; s < run.sentences.size(); ++s) {
            gold.push_back(run.sentences[s].gold_tags);
            pred.push_back(run.predictions[s]);
        }
        std::set<std::string> types;
        for (const auto& cls : labels.classes) {
            const BioTag t = parse_bio_lenient(cls);
            if (!t.is_outside) {
                types.insert(t.type);
            }
        }
        for (const auto& type : types) {
            out[type] = span_f1_for_type(gold, pred, type).f1;
        }
    }
    return out;
}

bool type_covered(const DemonstrationSet& demos, const std::string& key, bool bio_metric) {
    if (!bio_metric) {
        return demos.covered_labels.count(key) != 0;
    }
    for (const auto& cls : demos.covered_labels) {
        const BioTag t = parse_bio_lenient(cls);
        if (!t.is_outside && t.type == key) {
            return true;
        }
    }
    return false;
}

} // namespace

std::map<std::string, SeenUnseen> seen_unseen_split(const std::vector<RunResult>& runs,
                                                    const LabelSet& labels) {
    const bool bio_metric = labels.bio;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> buckets;
    for (const auto& run : runs) {
        if (run.failed) {
            continue;
        }
        const auto scores = per_class_scores(run, labels, bio_metric);
        for (const auto& [key, score] : scores) {
            if (type_covered(run.demonstrations, key, bio_metric)) {
                buckets[key].first.push_back(score);
            } else {
                buckets[key].second.push_back(score);
            }
        }
    }
    std::map<std::string, SeenUnseen> out;
    for (const auto& [key, pair] : buckets) {
        SeenUnseen su;
        auto mean = [](const std::vector<double>& v) {
            return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        if (!pair.first.empty()) {
            su.seen = mean(pair.first);
        }
        if (!pair.second.empty()) {
            su.unseen = mean(pair.second);
        }
        out[key] = su;
    }
    return out;
}

TrueLabelErrors true_label_error_fraction(const std::vector<RunResult>& runs,
                                          const LabelSet& shuffled,
                                          const LabelSet& original) {
    if (shuffled.variant != LabelVariant::shuffled) {
        throw std::invalid_argument("true_label_error_fraction: label set is not shuffled");
    }
    TrueLabelErrors out;
    std::map<std::string, std::pair<size_t, size_t>> per_gold; // errors, true-label errors
    for (const auto& run : runs) {
        if (run.failed) {
            continue;
        }
        for (size_t s = 0; s < run.sentences.size(); ++s) {
            const auto& gold = run.sentences[s].gold_tags;
            const auto& pred = run.predictions[s];
            for (size_t i = 0; i < gold.size(); ++i) {
                if (gold[i] == pred[i]) {
                    continue;
                }
                ++out.errors;
                auto& [e, t] = per_gold[gold[i]];
                ++e;
                // The model echoed the class's true surface: the shuffled
                // surface it emitted is the gold class's original one.
                if (shuffled.surface(pred[i]) == original.surface(gold[i])) {
                    ++out.true_label_errors;
                    ++t;
                }
            }
        }
    }
    out.overall = out.errors ? static_cast<double>(out.true_label_errors) /
                                   static_cast<double>(out.errors)
                             : 0.0;
    for (const auto& [cls, counts] : per_gold) {
        out.per_gold_class[cls] =
            counts.first ? static_cast<double>(counts.second) / static_cast<double>(counts.first)
                         : 0.0;
    }
    return out;
}

AggregateReport aggregate(const std::vector<RunResult>& runs, const LabelSet& labels,
                          bool bio_metric) {
    AggregateReport rep;
    rep.classes = labels.classes;
    std::map<std::string, std::pair<double, size_t>> class_sums;
    std::vector<ConfusionMatrix> matrices;
    for (const auto& run : runs) {
        if (run.failed) {
            continue;
        }
        rep.per_run.push_back(bio_metric ? run.f1 : run.token_accuracy);
        for (const auto& [key, score] : per_class_scores(run, labels, bio_metric)) {
            class_sums[key].first += score;
            class_sums[key].second += 1;
        }
        accumulate_confusion(rep.confusion_total, run.confusion);
        matrices.push_back(run.confusion);
    }
    rep.runs = rep.per_run.size();
    if (rep.runs == 0) {
        return rep;
    }
    rep.mean = std::accumulate(rep.per_run.begin(), rep.per_run.end(), 0.0) /
               static_cast<double>(rep.runs);
    if (rep.runs > 1) {
        double ss = 0.0;
        for (double v : rep.per_run) {
            ss += (v - rep.mean) * (v - rep.mean);
        }
        const double sd = std::sqrt(ss / static_cast<double>(rep.runs - 1));
        rep.stderr_ = sd / std::sqrt(static_cast<double>(rep.runs));
    }
    for (const auto& [key, sum] : class_sums) {
        rep.per_class[key] = sum.first / static_cast<double>(sum.second);
    }
    rep.confusion_display = display_confusion(rep.confusion_total);
    if (matrices.size() >= 2) {
        rep.run_spearman = confusion_spearman(matrices);
    }
    return rep;
}

LabelSetComparison label_set_comparison(
    const std::vector<std::pair<std::string, AggregateReport>>& reports) {
    if (reports.size() < 2) {
        throw std::invalid_argument("label_set_comparison: need at least 2 variants");
    }
    std::vector<std::string> keys;
    for (const auto& [cls, score] : reports[0].second.per_class) {
        (void)score;
        keys.push_back(cls);
    }
    for (const auto& [name, rep] : reports) {
        std::vector<std::string> k;
        for (const auto& [cls, score] : rep.per_class) {
            (void)score;
            k.push_back(cls);
        }
        if (k != keys) {
            throw std::invalid_argument("label_set_comparison: variant " + name +
                                        " evaluated over a different class set");
        }
    }
    LabelSetComparison cmp;
    const size_t n = reports.size();
    cmp.delta.assign(n, std::vector<double>(n, 0.0));
    cmp.rho.assign(n, std::vector<SpearmanResult>(n));
    std::vector<std::vector<double>> per_class_vecs(n);
    for (size_t i = 0; i < n; ++i) {
        cmp.variants.push_back(reports[i].first);
        for (const auto& key : keys) {
            per_class_vecs[i].push_back(reports[i].second.per_class.at(key));
        }
    }
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            cmp.delta[i][j] = reports[j].second.mean - reports[i].second.mean; // column - row
            cmp.rho[i][j] = i == j ? SpearmanResult{1.0, 0.0}
                                   : spearman(per_class_vecs[i], per_class_vecs[j]);
        }
    }
    return cmp;
}

} // namespace stag
