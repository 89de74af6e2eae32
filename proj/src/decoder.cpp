#include "stag/decoder.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stag {

void DecodeConfig::validate() const {
    prompt_config.validate();
    label_set.validate();
    if (enforce_bio && !label_set.bio) {
        throw std::invalid_argument("enforce_bio requires a BIO label set");
    }
}

namespace {

size_t argmax_score(const std::vector<CandidateScore>& scores) {
    size_t best = 0;
    for (size_t i = 1; i < scores.size(); ++i) {
        // Strict >: ties keep the candidate earlier in inventory order.
        if (scores[i].mean_logprob > scores[best].mean_logprob) {
            best = i;
        }
    }
    return best;
}

} // namespace

DecodeOutput tag_sentence(Backend& backend, const std::vector<TaggedSentence>& demonstrations,
                          const TaggedSentence& sentence, const DecodeConfig& config) {
    config.validate();
    if (sentence.words.empty()) {
        throw std::invalid_argument("tag_sentence: empty sentence");
    }
    const LabelSet& labels = config.label_set;
    std::optional<BioAutomaton> automaton;
    if (config.enforce_bio && labels.bio) {
        automaton.emplace(labels);
    }

    PromptState state =
        PromptState::begin(demonstrations, labels, sentence, config.prompt_config);
    auto session = backend.open_session(state.rendered_prefix());

    DecodeOutput out;
    std::optional<std::string> prev;
    while (!state.done()) {
        StepRecord step;
        step.word = state.pending_word();
        step.allowed = automaton ? automaton->allowed(prev) : labels.classes;

        session->append(state.pending_fragment());
        std::vector<std::string> candidates;
        candidates.reserve(step.allowed.size());
        for (const auto& cls : step.allowed) {
            candidates.push_back(labels.surface(cls));
        }
        const auto scores = session->score_candidates(candidates);
        for (const auto& s : scores) {
            step.mean_logprobs.push_back(s.mean_logprob);
        }
        const size_t best = argmax_score(scores);
        step.chosen = step.allowed[best];

        const std::string& surface = candidates[best];
        session->append(surface);
        state = state.advance(surface);
        prev = step.chosen;
        out.tags.push_back(step.chosen);
        out.trace.steps.push_back(std::move(step));
    }
    return out;
}

DecodeOutput tag_sentence_unconstrained(Backend& backend,
                                        const std::vector<TaggedSentence>& demonstrations,
                                        const TaggedSentence& sentence,
                                        const DecodeConfig& config) {
    if (config.constrained) {
        throw std::invalid_argument("tag_sentence_unconstrained: config.constrained must be off");
    }
    config.validate();
    if (sentence.words.empty()) {
        throw std::invalid_argument("tag_sentence: empty sentence");
    }
    const LabelSet& labels = config.label_set;
    PromptState state =
        PromptState::begin(demonstrations, labels, sentence, config.prompt_config);
    auto session = backend.open_session(state.rendered_prefix());
    const auto gen = session->generate_greedy("\n", config.max_gen_tokens);

    std::istringstream chunks(gen.text);
    std::string chunk;
    DecodeOutput out;
    size_t pos = 0;
    bool error = false;
    while (pos < sentence.words.size() && chunks >> chunk) {
        std::string surface;
        if (config.prompt_config.include_word_in_tagged) {
            const std::string expect =
                sentence.words[pos] + config.prompt_config.delimiter;
            if (chunk.rfind(expect, 0) != 0) {
                error = true; // generated word differs from the sentence word
                break;
            }
            surface = chunk.substr(expect.size());
        } else {
            surface = chunk;
        }
        const auto cls = labels.class_of_surface(surface);
        if (!cls) {
            error = true; // surface outside the verbalizer range
            break;
        }
        StepRecord step;
        step.word = sentence.words[pos];
        step.chosen = *cls;
        out.tags.push_back(*cls);
        out.trace.steps.push_back(std::move(step));
        ++pos;
    }
    if (error || pos < sentence.words.size()) {
        out.trace.format_error_position = pos;
    }
    return out;
}

std::vector<uint64_t> ExperimentConfig::effective_demo_seeds() const {
    const size_t runs = k == 0 ? 1 : m; // no demonstration variance at k=0
    if (!demo_seeds.empty()) {
        if (demo_seeds.size() < runs) {
            throw std::invalid_argument("run_experiment: fewer demo seeds than runs");
        }
        return {demo_seeds.begin(), demo_seeds.begin() + static_cast<long>(runs)};
    }
    std::vector<uint64_t> seeds(runs);
    for (size_t r = 0; r < runs; ++r) {
        seeds[r] = base_seed + r;
    }
    return seeds;
}

void score_run(RunResult& run, const LabelSet& labels, bool bio_metric) {
    std::vector<std::string> gold_flat, pred_flat;
    std::vector<std::vector<std::string>> gold, pred;
    for (size_t s = 0; s < run.sentences.size(); ++s) {
        gold.push_back(run.sentences[s].gold_tags);
        pred.push_back(run.predictions[s]);
        for (size_t i = 0; i < run.sentences[s].gold_tags.size(); ++i) {
            gold_flat.push_back(run.sentences[s].gold_tags[i]);
            pred_flat.push_back(run.predictions[s][i]);
        }
    }
    run.token_accuracy = token_accuracy(gold_flat, pred_flat);
    if (bio_metric) {
        const auto scores = span_f1(gold, pred);
        run.precision = scores.precision;
        run.recall = scores.recall;
        run.f1 = scores.f1;
    }
    run.per_class_gold.clear();
    run.per_class_correct.clear();
    for (size_t i = 0; i < gold_flat.size(); ++i) {
        run.per_class_gold[gold_flat[i]]++;
        run.per_class_correct[gold_flat[i]] += gold_flat[i] == pred_flat[i];
    }
    run.confusion = confusion(gold_flat, pred_flat, labels.classes);
}

std::vector<RunResult> run_experiment(Backend& backend, const TaskDataset& dataset,
                                      const ExperimentConfig& config) {
    config.decode.validate();
    if (config.m < 1) {
        throw std::invalid_argument("run_experiment: m must be >= 1");
    }
    const auto eval = sample_eval_subset(dataset, config.n_eval, config.eval_seed);
    const auto seeds = config.effective_demo_seeds();
    const LabelSet& labels = config.decode.label_set;
    const bool bio_metric = dataset.task != Task::POS;

    std::vector<RunResult> results;
    for (size_t r = 0; r < seeds.size(); ++r) {
        RunResult run;
        run.sentences = eval;
        run.predictions.assign(eval.size(), {});
        run.demonstrations =
            sample_demonstrations(dataset, config.k, seeds[r], config.max_attempts);

        std::atomic<bool> failed{false};
        std::string first_error;
        const int workers = std::max(1, config.workers);
#pragma omp parallel for schedule(dynamic) num_threads(workers) if (workers > 1)
        for (long i = 0; i < static_cast<long>(eval.size()); ++i) {
            if (failed.load()) {
                continue;
            }
            try {
                DecodeOutput decoded =
                    config.decode.constrained
                        ? tag_sentence(backend, run.demonstrations.sentences, eval[i],
                                       config.decode)
                        : tag_sentence_unconstrained(backend, run.demonstrations.sentences,
                                                     eval[i], config.decode);
                // Unconstrained output may stop at a format error; pad so
                // every token carries a class and stays scoreable.
                while (decoded.tags.size() < eval[i].words.size()) {
                    decoded.tags.push_back(labels.classes.front());
                }
                run.predictions[i] = std::move(decoded.tags);
            } catch (const std::exception& e) {
#pragma omp critical
                {
                    if (!failed.exchange(true)) {
                        first_error = e.what();
                    }
                }
            }
        }
        run.failed = failed.load();
        run.error = first_error;
        if (!run.failed) {
            score_run(run, labels, bio_metric);
        }

        nlohmann::json manifest;
        manifest["task"] = to_string(dataset.task);
        manifest["k"] = config.k;
        manifest["m"] = config.m;
        manifest["run"] = r;
        manifest["demo_seed"] = seeds[r];
        manifest["eval_seed"] = config.eval_seed;
        manifest["n_eval"] = config.n_eval;
        manifest["max_attempts"] = config.max_attempts;
        manifest["label_variant"] = to_string(labels.variant);
        manifest["classes"] = labels.classes;
        manifest["prompt"] = {
            {"context_keyword", config.decode.prompt_config.context_keyword},
            {"tagged_keyword", config.decode.prompt_config.tagged_keyword},
            {"delimiter", std::string(1, config.decode.prompt_config.delimiter)},
            {"include_word_in_tagged", config.decode.prompt_config.include_word_in_tagged},
        };
        manifest["constrained"] = config.decode.constrained;
        manifest["enforce_bio"] = config.decode.enforce_bio;
        manifest["backend"] = backend.describe();
        std::vector<std::string> demo_ids;
        for (const auto& s : run.demonstrations.sentences) {
            demo_ids.push_back(s.sentence_id);
        }
        manifest["demonstration_ids"] = demo_ids;
        manifest["covered_labels"] = std::vector<std::string>(
            run.demonstrations.covered_labels.begin(), run.demonstrations.covered_labels.end());
        run.manifest = std::move(manifest);
        results.push_back(std::move(run));
    }
    return results;
}

std::string format_predictions_tsv(const RunResult& run) {
    std::ostringstream out;
    for (size_t s = 0; s < run.sentences.size(); ++s) {
        const auto& sent = run.sentences[s];
        for (size_t i = 0; i < sent.words.size(); ++i) {
            out << sent.sentence_id << '\t' << i << '\t' << sent.words[i] << '\t'
                << sent.gold_tags[i] << '\t' << run.predictions[s][i] << '\n';
        }
    }
    return out.str();
}

RunResult parse_predictions_tsv(const std::string& text) {
    RunResult run;
    std::istringstream in(text);
    std::string line;
    TaggedSentence cur;
    std::vector<std::string> cur_pred;
    size_t lineno = 0;
    auto flush = [&]() {
        if (!cur.words.empty()) {
            run.sentences.push_back(cur);
            run.predictions.push_back(cur_pred);
        }
        cur = TaggedSentence{};
        cur_pred.clear();
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cols;
        size_t start = 0;
        for (;;) {
            const size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                cols.push_back(line.substr(start));
                break;
            }
            cols.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (cols.size() != 5) {
            throw ParseError("predictions line " + std::to_string(lineno) +
                             ": expected 5 tab-separated columns");
        }
        if (cols[1] == "0") {
            flush();
            cur.sentence_id = cols[0];
        }
        cur.words.push_back(cols[2]);
        cur.gold_tags.push_back(cols[3]);
        cur_pred.push_back(cols[4]);
    }
    flush();
    return run;
}

} // namespace stag
