#include "efgnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "efgnn/text.hpp"

namespace efgnn {

namespace {

void sort_and_dedupe(std::vector<std::pair<int, int>>& edges) {
    for (auto& e : edges) {
        if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

/// Default citation split: first 20 labeled nodes per class -> train, the
/// next 500 nodes in index order -> val, the last 1000 node indices -> test
/// (minus any already claimed by train/val).
void apply_citation_split_convention(DatasetBundle& bundle) {
    const std::size_t n = bundle.nodes();
    bundle.train_mask.assign(n, 0);
    bundle.val_mask.assign(n, 0);
    bundle.test_mask.assign(n, 0);

    std::vector<int> taken(static_cast<std::size_t>(bundle.num_classes), 0);
    for (std::size_t i = 0; i < n; ++i) {
        int& count = taken[static_cast<std::size_t>(bundle.labels[i])];
        if (count < 20) {
            bundle.train_mask[i] = 1;
            ++count;
        }
    }
    std::size_t val_taken = 0;
    for (std::size_t i = 0; i < n && val_taken < 500; ++i) {
        if (bundle.train_mask[i]) continue;
        bundle.val_mask[i] = 1;
        ++val_taken;
    }
    const std::size_t first_test = n > 1000 ? n - 1000 : 0;
    for (std::size_t i = first_test; i < n; ++i) {
        if (bundle.train_mask[i] || bundle.val_mask[i]) continue;
        bundle.test_mask[i] = 1;
    }
}

void parse_splits_into(DatasetBundle& bundle, const std::string& splits_path) {
    const std::size_t n = bundle.nodes();
    bundle.train_mask.assign(n, 0);
    bundle.val_mask.assign(n, 0);
    bundle.test_mask.assign(n, 0);

    const std::vector<std::string> lines = read_lines(splits_path);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string line = trim(lines[li]);
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> parts = split_whitespace(line);
        if (parts.size() != 2)
            throw ParseError(splits_path + ": expected '<split> <ranges>'", li + 1);
        std::vector<std::uint8_t>* mask = nullptr;
        if (parts[0] == "train") mask = &bundle.train_mask;
        else if (parts[0] == "val") mask = &bundle.val_mask;
        else if (parts[0] == "test") mask = &bundle.test_mask;
        else throw ParseError(splits_path + ": unknown split '" + parts[0] + "'", li + 1);

        for (const std::string& range : split_char(parts[1], ',')) {
            long long lo = 0, hi = 0;
            const std::size_t dash = range.find('-');
            if (dash == std::string::npos) {
                auto v = parse_integer(range);
                if (!v) throw ParseError(splits_path + ": bad index '" + range + "'", li + 1);
                lo = hi = *v;
            } else {
                auto a = parse_integer(range.substr(0, dash));
                auto b = parse_integer(range.substr(dash + 1));
                if (!a || !b)
                    throw ParseError(splits_path + ": bad range '" + range + "'", li + 1);
                lo = *a;
                hi = *b;
            }
            if (lo < 0 || hi < lo || static_cast<std::size_t>(hi) >= n)
                throw ParseError(splits_path + ": range '" + range + "' out of bounds", li + 1);
            for (long long i = lo; i <= hi; ++i) {
                const auto idx = static_cast<std::size_t>(i);
                if (bundle.train_mask[idx] || bundle.val_mask[idx] || bundle.test_mask[idx])
                    throw ParseError(splits_path + ": node " + std::to_string(i) +
                                         " assigned to two splits",
                                     li + 1);
                (*mask)[idx] = 1;
            }
        }
    }
}

std::string format_mask_ranges(const std::vector<std::uint8_t>& mask) {
    std::string out;
    std::size_t i = 0;
    while (i < mask.size()) {
        if (!mask[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < mask.size() && mask[j + 1]) ++j;
        if (!out.empty()) out += ',';
        out += std::to_string(i);
        if (j > i) out += '-' + std::to_string(j);
        i = j + 1;
    }
    return out;
}

}  // namespace

void DatasetBundle::validate() const {
    const std::size_t n = labels.size();
    if (n == 0) throw std::invalid_argument("dataset: empty");
    if (features.rows != n) throw std::invalid_argument("dataset: feature row count mismatch");
    if (train_mask.size() != n || val_mask.size() != n || test_mask.size() != n)
        throw std::invalid_argument("dataset: mask size mismatch");
    if (num_classes < 2) throw std::invalid_argument("dataset: needs at least 2 classes");
    if (!features.all_finite()) throw std::invalid_argument("dataset: non-finite feature");

    std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
    for (int label : labels) {
        if (label < 0 || label >= num_classes)
            throw std::invalid_argument("dataset: label out of range");
        seen[static_cast<std::size_t>(label)] = true;
    }
    for (bool s : seen) {
        if (!s) throw std::invalid_argument("dataset: a class has no nodes");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (train_mask[i] + val_mask[i] + test_mask[i] > 1)
            throw std::invalid_argument("dataset: masks overlap at node " + std::to_string(i));
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto& [u, v] = edges[e];
        if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n ||
            static_cast<std::size_t>(v) >= n)
            throw std::invalid_argument("dataset: edge endpoint out of range");
        if (u >= v) throw std::invalid_argument("dataset: edge not in canonical u < v order");
        if (e > 0 && !(edges[e - 1] < edges[e]))
            throw std::invalid_argument("dataset: edges not sorted/unique");
    }
}

void SbmSpec::validate() const {
    if (classes < 2) throw std::invalid_argument("sbm: needs at least 2 blocks");
    if (nodes < classes) throw std::invalid_argument("sbm: fewer nodes than blocks");
    if (!(p_out >= 0.0 && p_in <= 1.0 && p_out < p_in))
        throw std::invalid_argument("sbm: requires 0 <= p_out < p_in <= 1");
    if (feature_dim < 1) throw std::invalid_argument("sbm: feature_dim must be >= 1");
    if (!(noise >= 0.0) || !(separation >= 0.0))
        throw std::invalid_argument("sbm: separation and noise must be >= 0");
    if (train_per_class < 1) throw std::invalid_argument("sbm: train_per_class must be >= 1");
    if (val_per_class < 0) throw std::invalid_argument("sbm: val_per_class must be >= 0");
    const int min_block = nodes / classes;
    if (train_per_class + val_per_class > min_block)
        throw std::invalid_argument("sbm: split counts exceed the smallest block");
}

DatasetBundle load_citation_raw(const std::string& content_path, const std::string& cites_path,
                                const std::string& split_path) {
    const std::vector<std::string> content = read_lines(content_path);

    std::map<std::string, std::size_t> id_to_index;
    std::vector<std::vector<double>> feature_rows;
    std::vector<std::string> label_names;
    std::size_t width = 0;  // tokens per line, fixed by the first data line

    for (std::size_t li = 0; li < content.size(); ++li) {
        const std::vector<std::string> tokens = split_whitespace(content[li]);
        if (tokens.empty()) continue;
        if (width == 0) {
            width = tokens.size();
            if (width < 3)
                throw ParseError(content_path + ": need at least id, one feature, label",
                                 li + 1);
        }
        if (tokens.size() != width)
            throw ParseError(content_path + ": expected " + std::to_string(width) +
                                 " fields, got " + std::to_string(tokens.size()),
                             li + 1);
        if (!id_to_index.emplace(tokens.front(), feature_rows.size()).second)
            throw ParseError(content_path + ": duplicate node id '" + tokens.front() + "'",
                             li + 1);
        std::vector<double> row(width - 2);
        for (std::size_t f = 0; f < width - 2; ++f) {
            auto v = parse_real(tokens[f + 1]);
            if (!v || !std::isfinite(*v))
                throw ParseError(content_path + ": bad feature value '" + tokens[f + 1] + "'",
                                 li + 1);
            row[f] = *v;
        }
        feature_rows.push_back(std::move(row));
        label_names.push_back(tokens.back());
    }
    if (feature_rows.empty()) throw ParseError(content_path + ": no records");

    // Factorize string labels in alphabetical order.
    std::vector<std::string> classes(label_names);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    std::map<std::string, int> class_index;
    for (std::size_t c = 0; c < classes.size(); ++c)
        class_index[classes[c]] = static_cast<int>(c);

    DatasetBundle bundle;
    const std::size_t n = feature_rows.size();
    bundle.features = FeatureMatrix(n, width - 2);
    for (std::size_t i = 0; i < n; ++i)
        std::copy(feature_rows[i].begin(), feature_rows[i].end(), bundle.features.row(i));
    bundle.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) bundle.labels[i] = class_index[label_names[i]];
    bundle.num_classes = static_cast<int>(classes.size());

    const std::vector<std::string> cites = read_lines(cites_path);
    for (std::size_t li = 0; li < cites.size(); ++li) {
        const std::vector<std::string> tokens = split_whitespace(cites[li]);
        if (tokens.empty()) continue;
        if (tokens.size() != 2)
            throw ParseError(cites_path + ": expected '<citing> <cited>'", li + 1);
        auto a = id_to_index.find(tokens[0]);
        auto b = id_to_index.find(tokens[1]);
        if (a == id_to_index.end() || b == id_to_index.end()) {
            ++bundle.dangling_edges;
            continue;
        }
        if (a->second == b->second) continue;  // self-citation carries no edge
        bundle.edges.emplace_back(static_cast<int>(a->second), static_cast<int>(b->second));
    }
    sort_and_dedupe(bundle.edges);

    if (split_path.empty()) {
        apply_citation_split_convention(bundle);
    } else {
        parse_splits_into(bundle, split_path);
    }
    bundle.validate();
    return bundle;
}

DatasetBundle load_generic(const std::string& features_csv, const std::string& edges_tsv,
                           const std::string& labels_csv, const std::string& splits_path) {
    DatasetBundle bundle;

    const std::vector<std::string> frows = read_lines(features_csv);
    std::vector<std::vector<double>> values;
    for (std::size_t li = 0; li < frows.size(); ++li) {
        if (trim(frows[li]).empty()) continue;
        const std::vector<std::string> fields = split_char(frows[li], ',');
        if (!values.empty() && fields.size() != values.front().size())
            throw ParseError(features_csv + ": inconsistent column count", li + 1);
        std::vector<double> row(fields.size());
        for (std::size_t f = 0; f < fields.size(); ++f) {
            auto v = parse_real(trim(fields[f]));
            if (!v || !std::isfinite(*v))
                throw ParseError(features_csv + ": bad value '" + fields[f] + "'", li + 1);
            row[f] = *v;
        }
        values.push_back(std::move(row));
    }
    if (values.empty()) throw ParseError(features_csv + ": no rows");
    const std::size_t n = values.size();
    bundle.features = FeatureMatrix(n, values.front().size());
    for (std::size_t i = 0; i < n; ++i)
        std::copy(values[i].begin(), values[i].end(), bundle.features.row(i));

    const std::vector<std::string> lrows = read_lines(labels_csv);
    int max_label = -1;
    for (std::size_t li = 0; li < lrows.size(); ++li) {
        const std::string tok = trim(lrows[li]);
        if (tok.empty()) continue;
        auto v = parse_integer(tok);
        if (!v || *v < 0) throw ParseError(labels_csv + ": bad label '" + tok + "'", li + 1);
        bundle.labels.push_back(static_cast<int>(*v));
        max_label = std::max(max_label, static_cast<int>(*v));
    }
    if (bundle.labels.size() != n)
        throw ParseError(labels_csv + ": " + std::to_string(bundle.labels.size()) +
                         " labels for " + std::to_string(n) + " feature rows");
    bundle.num_classes = max_label + 1;

    const std::vector<std::string> erows = read_lines(edges_tsv);
    for (std::size_t li = 0; li < erows.size(); ++li) {
        const std::vector<std::string> tokens = split_whitespace(erows[li]);
        if (tokens.empty()) continue;
        if (tokens.size() != 2) throw ParseError(edges_tsv + ": expected two endpoints", li + 1);
        auto a = parse_integer(tokens[0]);
        auto b = parse_integer(tokens[1]);
        if (!a || !b) throw ParseError(edges_tsv + ": bad endpoint", li + 1);
        if (*a < 0 || *b < 0 || static_cast<std::size_t>(*a) >= n ||
            static_cast<std::size_t>(*b) >= n)
            throw ParseError(edges_tsv + ": endpoint out of range", li + 1);
        if (*a == *b) throw ParseError(edges_tsv + ": self-loop not allowed", li + 1);
        bundle.edges.emplace_back(static_cast<int>(*a), static_cast<int>(*b));
    }
    sort_and_dedupe(bundle.edges);

    if (splits_path.empty()) {
        bundle.train_mask.assign(n, 0);
        bundle.val_mask.assign(n, 0);
        bundle.test_mask.assign(n, 0);
    } else {
        parse_splits_into(bundle, splits_path);
    }
    bundle.validate();
    return bundle;
}

void save_generic(const DatasetBundle& bundle, const std::string& features_csv,
                  const std::string& edges_tsv, const std::string& labels_csv,
                  const std::string& splits_path) {
    bundle.validate();

    std::ofstream fout(features_csv);
    if (!fout) throw std::runtime_error("cannot write " + features_csv);
    for (std::size_t i = 0; i < bundle.features.rows; ++i) {
        const double* row = bundle.features.row(i);
        for (std::size_t f = 0; f < bundle.features.cols; ++f) {
            if (f) fout << ',';
            fout << format_double(row[f]);
        }
        fout << '\n';
    }

    std::ofstream eout(edges_tsv);
    if (!eout) throw std::runtime_error("cannot write " + edges_tsv);
    for (const auto& [u, v] : bundle.edges) eout << u << '\t' << v << '\n';

    std::ofstream lout(labels_csv);
    if (!lout) throw std::runtime_error("cannot write " + labels_csv);
    for (int label : bundle.labels) lout << label << '\n';

    std::ofstream sout(splits_path);
    if (!sout) throw std::runtime_error("cannot write " + splits_path);
    const std::pair<const char*, const std::vector<std::uint8_t>*> splits[] = {
        {"train", &bundle.train_mask}, {"val", &bundle.val_mask}, {"test", &bundle.test_mask}};
    for (const auto& [name, mask] : splits) {
        const std::string ranges = format_mask_ranges(*mask);
        if (!ranges.empty()) sout << name << ' ' << ranges << '\n';
    }
}

DatasetBundle generate_sbm(const SbmSpec& spec) {
    spec.validate();
    const std::size_t n = static_cast<std::size_t>(spec.nodes);
    const int k = spec.classes;

    DatasetBundle bundle;
    bundle.num_classes = k;
    bundle.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        bundle.labels[i] = static_cast<int>((i * static_cast<std::size_t>(k)) / n);

    Rng edge_rng(derive_seed(spec.seed, Stream::sbm_edges));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double p = bundle.labels[i] == bundle.labels[j] ? spec.p_in : spec.p_out;
            if (edge_rng.bernoulli(p))
                bundle.edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }

    const std::size_t d = static_cast<std::size_t>(spec.feature_dim);
    Rng feat_rng(derive_seed(spec.seed, Stream::sbm_features));
    bundle.features = FeatureMatrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = bundle.features.row(i);
        const std::size_t mean_axis = static_cast<std::size_t>(bundle.labels[i]) % d;
        for (std::size_t f = 0; f < d; ++f) {
            const double mean = f == mean_axis ? spec.separation : 0.0;
            row[f] = mean + spec.noise * feat_rng.normal();
        }
    }

    bundle.train_mask.assign(n, 0);
    bundle.val_mask.assign(n, 0);
    bundle.test_mask.assign(n, 0);
    std::vector<int> position(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
        int& pos = position[static_cast<std::size_t>(bundle.labels[i])];
        if (pos < spec.train_per_class) bundle.train_mask[i] = 1;
        else if (pos < spec.train_per_class + spec.val_per_class) bundle.val_mask[i] = 1;
        else bundle.test_mask[i] = 1;
        ++pos;
    }

    bundle.validate();
    return bundle;
}

FeatureMatrix inject_ood_noise(const FeatureMatrix& features, double eta, std::uint64_t seed) {
    if (!(eta >= 0.0) || !std::isfinite(eta))
        throw std::invalid_argument("inject_ood_noise: eta must be finite and >= 0");
    FeatureMatrix out = features;
    if (eta == 0.0) return out;
    Rng rng(derive_seed(seed, Stream::ood_noise));
    for (double& v : out.data) v += eta * rng.normal();
    return out;
}

void row_normalize(FeatureMatrix& features) {
    for (std::size_t i = 0; i < features.rows; ++i) {
        double* row = features.row(i);
        double norm = 0.0;
        for (std::size_t f = 0; f < features.cols; ++f) norm += std::abs(row[f]);
        if (norm == 0.0) continue;
        for (std::size_t f = 0; f < features.cols; ++f) row[f] /= norm;
    }
}

}  // namespace efgnn
