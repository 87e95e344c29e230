#include "efgnn/checkpoint.hpp"

#include <fstream>

#include "efgnn/data.hpp"
#include "efgnn/text.hpp"

namespace efgnn {

namespace {

constexpr const char* kMagic = "efgnn-checkpoint v1";

void write_tensor(std::ofstream& out, const char* name, const std::vector<double>& values,
                  std::size_t row_width) {
    out << name << ' ' << values.size() / row_width << ' ' << row_width << '\n';
    for (std::size_t i = 0; i < values.size(); i += row_width) {
        for (std::size_t j = 0; j < row_width; ++j) {
            if (j) out << '\t';
            out << format_double(values[i + j]);
        }
        out << '\n';
    }
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << kMagic << '\n';
    out << "config_hash " << model.config_hash << '\n';
    out << "hops";
    for (int h : model.hops) out << ' ' << h;
    out << '\n';
    const ModelParams& p = model.params;
    out << "dims " << p.in_dim << ' ' << p.hidden << ' ' << p.classes << '\n';
    write_tensor(out, "w1", p.w1, p.hidden);
    write_tensor(out, "b1", p.b1, p.b1.size());
    write_tensor(out, "w2", p.w2, p.classes);
    write_tensor(out, "b2", p.b2, p.b2.size());
    if (!out) throw std::runtime_error("write failed for " + path);
}

TrainedModel load_checkpoint(const std::string& path) {
    const std::vector<std::string> lines = read_lines(path);
    std::size_t li = 0;
    auto next_line = [&]() -> const std::string& {
        if (li >= lines.size()) throw ParseError(path + ": truncated checkpoint", lines.size());
        return lines[li++];
    };

    if (next_line() != kMagic) throw ParseError(path + ": bad header", 1);

    TrainedModel model;
    {
        const std::vector<std::string> parts = split_whitespace(next_line());
        if (parts.size() != 2 || parts[0] != "config_hash")
            throw ParseError(path + ": expected config_hash line", li);
        model.config_hash = parts[1];
    }
    {
        const std::vector<std::string> parts = split_whitespace(next_line());
        if (parts.empty() || parts[0] != "hops" || parts.size() < 2)
            throw ParseError(path + ": expected hops line", li);
        for (std::size_t i = 1; i < parts.size(); ++i) {
            auto v = parse_integer(parts[i]);
            if (!v) throw ParseError(path + ": bad hop '" + parts[i] + "'", li);
            model.hops.push_back(static_cast<int>(*v));
        }
    }
    std::size_t in_dim = 0, hidden = 0, classes = 0;
    {
        const std::vector<std::string> parts = split_whitespace(next_line());
        if (parts.size() != 4 || parts[0] != "dims")
            throw ParseError(path + ": expected dims line", li);
        auto dim = [&](const std::string& tok) {
            auto v = parse_integer(tok);
            if (!v || *v < 1) throw ParseError(path + ": bad dimension '" + tok + "'", li);
            return static_cast<std::size_t>(*v);
        };
        in_dim = dim(parts[1]);
        hidden = dim(parts[2]);
        classes = dim(parts[3]);
    }

    auto read_tensor = [&](const char* name, std::size_t rows,
                           std::size_t cols) -> std::vector<double> {
        const std::vector<std::string> head = split_whitespace(next_line());
        if (head.size() != 3 || head[0] != name)
            throw ParseError(path + ": expected tensor '" + name + "'", li);
        const auto r = parse_integer(head[1]);
        const auto c = parse_integer(head[2]);
        if (!r || !c || static_cast<std::size_t>(*r) != rows ||
            static_cast<std::size_t>(*c) != cols)
            throw ParseError(path + ": tensor '" + std::string(name) + "' shape mismatch", li);
        std::vector<double> values;
        values.reserve(rows * cols);
        for (std::size_t i = 0; i < rows; ++i) {
            const std::vector<std::string> cells = split_whitespace(next_line());
            if (cells.size() != cols)
                throw ParseError(path + ": tensor row width mismatch", li);
            for (const std::string& cell : cells) {
                auto v = parse_real(cell);
                if (!v) throw ParseError(path + ": bad value '" + cell + "'", li);
                values.push_back(*v);
            }
        }
        return values;
    };

    ModelParams& p = model.params;
    p.in_dim = in_dim;
    p.hidden = hidden;
    p.classes = classes;
    p.w1 = read_tensor("w1", in_dim, hidden);
    p.b1 = read_tensor("b1", 1, hidden);
    p.w2 = read_tensor("w2", hidden, classes);
    p.b2 = read_tensor("b2", 1, classes);
    if (li != lines.size()) throw ParseError(path + ": trailing content", li + 1);
    return model;
}

}  // namespace efgnn
