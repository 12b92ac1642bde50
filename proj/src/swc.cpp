#include "vprune/swc.hpp"

#include <charconv>
#include <cstdio>

#include "vprune/util.hpp"

namespace vprune {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        std::size_t j = i;
        while (j < line.size() && !is_space(line[j])) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view f, int line_no, const char* what) {
    T value{};
    const auto* first = f.data();
    const auto* last = f.data() + f.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError("swc line " + std::to_string(line_no) + ": bad " + what + " '" +
                         std::string(f) + "'");
    return value;
}

}  // namespace

VesselTree swc_parse(std::string_view text) {
    VesselTree tree;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                              : nl - pos);
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        ++line_no;

        const auto fields = split_fields(line);
        if (fields.empty() || fields[0][0] == '#') continue;
        if (fields.size() != 7)
            throw ParseError("swc line " + std::to_string(line_no) + ": expected 7 fields, got " +
                             std::to_string(fields.size()));
        VesselNode n;
        n.id = parse_number<long long>(fields[0], line_no, "id");
        n.kind = parse_number<int>(fields[1], line_no, "kind");
        n.pos.x() = parse_number<double>(fields[2], line_no, "x");
        n.pos.y() = parse_number<double>(fields[3], line_no, "y");
        n.pos.z() = parse_number<double>(fields[4], line_no, "z");
        n.radius = parse_number<double>(fields[5], line_no, "radius");
        n.parent = parse_number<long long>(fields[6], line_no, "parent");
        tree.nodes.push_back(n);
    }
    tree.validate();
    return tree;
}

std::string swc_serialize(const VesselTree& tree) {
    std::string out;
    out.reserve(tree.nodes.size() * 48);
    for (const auto& n : tree.nodes) {
        out += std::to_string(n.id);
        out += ' ';
        out += std::to_string(n.kind);
        out += ' ';
        out += g9(n.pos.x());
        out += ' ';
        out += g9(n.pos.y());
        out += ' ';
        out += g9(n.pos.z());
        out += ' ';
        out += g9(n.radius);
        out += ' ';
        out += std::to_string(n.parent);
        out += '\n';
    }
    return out;
}

VesselTree swc_read(const std::filesystem::path& path) { return swc_parse(read_file(path)); }

void swc_write(const std::filesystem::path& path, const VesselTree& tree) {
    write_file(path, swc_serialize(tree));
}

}  // namespace vprune
