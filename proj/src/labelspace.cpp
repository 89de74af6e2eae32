#include "stag/labelspace.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "stag/rng.hpp"

namespace stag {

Task task_from_string(const std::string& s) {
    if (s == "POS" || s == "pos") return Task::POS;
    if (s == "CHUNK" || s == "chunk") return Task::CHUNK;
    if (s == "NER" || s == "ner") return Task::NER;
    throw std::invalid_argument("unknown task: " + s);
}

std::string to_string(Task t) {
    switch (t) {
        case Task::POS: return "POS";
        case Task::CHUNK: return "CHUNK";
        case Task::NER: return "NER";
    }
    throw std::logic_error("bad task enum");
}

std::string to_string(LabelVariant v) {
    switch (v) {
        case LabelVariant::original: return "original";
        case LabelVariant::shuffled: return "shuffled";
        case LabelVariant::proxy: return "proxy";
        case LabelVariant::words: return "words";
    }
    throw std::logic_error("bad variant enum");
}

LabelVariant variant_from_string(const std::string& s) {
    if (s == "original") return LabelVariant::original;
    if (s == "shuffled") return LabelVariant::shuffled;
    if (s == "proxy") return LabelVariant::proxy;
    if (s == "words") return LabelVariant::words;
    throw std::invalid_argument("unknown label variant: " + s);
}

BioTag parse_bio(const std::string& cls) {
    if (cls == "O") {
        return BioTag{true, 0, ""};
    }
    if (cls.size() >= 3 && (cls[0] == 'B' || cls[0] == 'I') && cls[1] == '-') {
        return BioTag{false, cls[0], cls.substr(2)};
    }
    throw std::invalid_argument("not a BIO class identifier: " + cls);
}

const std::string& LabelSet::surface(const std::string& cls) const {
    auto it = surfaces.find(cls);
    if (it == surfaces.end()) {
        throw std::out_of_range("class not in label set: " + cls);
    }
    return it->second;
}

std::optional<std::string> LabelSet::class_of_surface(const std::string& surface) const {
    for (const auto& [cls, surf] : surfaces) {
        if (surf == surface) {
            return cls;
        }
    }
    return std::nullopt;
}

size_t LabelSet::index_of(const std::string& cls) const {
    auto it = std::find(classes.begin(), classes.end(), cls);
    if (it == classes.end()) {
        throw std::out_of_range("class not in label set: " + cls);
    }
    return static_cast<size_t>(it - classes.begin());
}

bool LabelSet::contains(const std::string& cls) const {
    return surfaces.count(cls) != 0;
}

void LabelSet::validate() const {
    if (classes.size() != surfaces.size()) {
        throw std::logic_error("label set: class/surface count mismatch");
    }
    std::set<std::string> seen;
    for (const auto& cls : classes) {
        const auto& surf = surface(cls);
        if (!seen.insert(surf).second) {
            throw std::logic_error("label set: duplicate surface " + surf);
        }
        if (bio) {
            parse_bio(cls); // throws when malformed
        }
    }
}

namespace {

const std::vector<std::string> kUposTags = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
};

const std::vector<std::string> kNerTypes = {"PER", "ORG", "LOC", "MISC"};

std::vector<std::string> bio_classes(const std::vector<std::string>& types) {
    std::vector<std::string> out = {"O"};
    for (const auto& t : types) {
        out.push_back("B-" + t);
        out.push_back("I-" + t);
    }
    return out;
}

LabelSet identity_set(std::vector<std::string> classes, bool bio) {
    LabelSet ls;
    ls.classes = std::move(classes);
    for (const auto& c : ls.classes) {
        ls.surfaces[c] = c;
    }
    ls.variant = LabelVariant::original;
    ls.bio = bio;
    ls.validate();
    return ls;
}

// Entity types in first-occurrence order over the class inventory.
std::vector<std::string> entity_types(const LabelSet& ls) {
    std::vector<std::string> types;
    for (const auto& cls : ls.classes) {
        const BioTag tag = parse_bio(cls);
        if (!tag.is_outside &&
            std::find(types.begin(), types.end(), tag.type) == types.end()) {
            types.push_back(tag.type);
        }
    }
    return types;
}

} // namespace

LabelSet original_labels(Task task) {
    switch (task) {
        case Task::POS:
            return identity_set(kUposTags, false);
        case Task::NER:
            return identity_set(bio_classes(kNerTypes), true);
        case Task::CHUNK:
            throw std::invalid_argument(
                "CHUNK has no fixed inventory; pass the tags observed in the data");
    }
    throw std::logic_error("bad task enum");
}

LabelSet original_labels(Task task, const std::vector<std::string>& inventory) {
    if (task == Task::POS || task == Task::NER) {
        return original_labels(task);
    }
    // CHUNK: order the BIO classes by first occurrence of each type,
    // regardless of inventory order quirks in the data.
    LabelSet probe = identity_set(inventory, true); // validates BIO shape
    std::vector<std::string> types = entity_types(probe);
    LabelSet ls = identity_set(bio_classes(types), true);
    for (const auto& cls : inventory) {
        if (!ls.contains(cls)) {
            throw std::invalid_argument("inventory class missing from BIO closure: " + cls);
        }
    }
    return ls;
}

LabelSet shuffle_labels(const LabelSet& base, uint64_t seed) {
    if (base.variant != LabelVariant::original) {
        throw std::invalid_argument("shuffle_labels requires the original variant");
    }
    const size_t n = base.classes.size();
    LabelSet out = base;
    out.variant = LabelVariant::shuffled;
    if (n < 2) {
        return out;
    }
    Rng rng(seed);
    // Redraw until the permutation is a derangement; expected ~e attempts.
    std::vector<size_t> perm;
    for (;;) {
        perm = rng.permutation(n);
        bool fixed_point = false;
        for (size_t i = 0; i < n; ++i) {
            if (perm[i] == i) {
                fixed_point = true;
                break;
            }
        }
        if (!fixed_point) {
            break;
        }
    }
    for (size_t i = 0; i < n; ++i) {
        out.surfaces[base.classes[i]] = base.surface(base.classes[perm[i]]);
    }
    out.validate();
    return out;
}

LabelSet proxy_labels(const LabelSet& base, int start) {
    if (start < 0) {
        throw std::invalid_argument("proxy_labels: start must be non-negative");
    }
    LabelSet out = base;
    out.variant = LabelVariant::proxy;
    if (!base.bio) {
        for (size_t i = 0; i < base.classes.size(); ++i) {
            out.surfaces[base.classes[i]] = std::to_string(start + static_cast<int>(i));
        }
    } else {
        // Number entity types, not BIO classes; "O" keeps its surface.
        const std::vector<std::string> types = entity_types(base);
        std::unordered_map<std::string, std::string> type_surface;
        for (size_t i = 0; i < types.size(); ++i) {
            type_surface[types[i]] = std::to_string(start + static_cast<int>(i));
        }
        for (const auto& cls : base.classes) {
            const BioTag tag = parse_bio(cls);
            if (!tag.is_outside) {
                out.surfaces[cls] = std::string(1, tag.prefix) + "-" + type_surface[tag.type];
            }
        }
    }
    out.validate();
    return out;
}

LabelSet words_labels(const LabelSet& base, const std::string& mapping_path) {
    std::ifstream in(mapping_path);
    if (!in) {
        throw std::runtime_error("cannot open words-label mapping: " + mapping_path);
    }
    std::unordered_map<std::string, std::string> map;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(mapping_path + ":" + std::to_string(lineno) +
                                     ": expected two tab-separated columns");
        }
        map[line.substr(0, tab)] = line.substr(tab + 1);
    }
    LabelSet out = base;
    out.variant = LabelVariant::words;
    for (const auto& cls : base.classes) {
        if (!base.bio) {
            auto it = map.find(cls);
            if (it == map.end()) {
                throw std::runtime_error("words mapping missing class: " + cls);
            }
            out.surfaces[cls] = it->second;
        } else {
            const BioTag tag = parse_bio(cls);
            if (tag.is_outside) {
                continue; // "O" keeps its surface
            }
            auto it = map.find(tag.type);
            if (it == map.end()) {
                it = map.find(cls); // full class ids also accepted
            }
            if (it == map.end()) {
                throw std::runtime_error("words mapping missing type: " + tag.type);
            }
            out.surfaces[cls] = std::string(1, tag.prefix) + "-" + it->second;
        }
    }
    out.validate();
    return out;
}

BioAutomaton::BioAutomaton(const LabelSet& labels) : classes_(labels.classes) {
    if (!labels.bio) {
        throw std::invalid_argument("BioAutomaton requires a BIO label set");
    }
    for (const auto& cls : classes_) {
        parsed_[cls] = parse_bio(cls);
    }
}

bool BioAutomaton::transition_ok(const std::optional<std::string>& previous,
                                 const std::string& next) const {
    auto nit = parsed_.find(next);
    if (nit == parsed_.end()) {
        throw std::out_of_range("unknown class: " + next);
    }
    const BioTag& n = nit->second;
    if (n.is_outside || n.prefix == 'B') {
        return true;
    }
    // I-X: needs a running span of type X.
    if (!previous) {
        return false;
    }
    auto pit = parsed_.find(*previous);
    if (pit == parsed_.end()) {
        throw std::out_of_range("unknown class: " + *previous);
    }
    const BioTag& p = pit->second;
    return !p.is_outside && p.type == n.type;
}

std::vector<std::string> BioAutomaton::allowed(const std::optional<std::string>& previous) const {
    std::vector<std::string> out;
    for (const auto& cls : classes_) {
        if (transition_ok(previous, cls)) {
            out.push_back(cls);
        }
    }
    return out;
}

bool BioAutomaton::accepts(const std::vector<std::string>& tags) const {
    std::optional<std::string> prev;
    for (const auto& t : tags) {
        if (!transition_ok(prev, t)) {
            return false;
        }
        prev = t;
    }
    return true;
}

} // namespace stag
