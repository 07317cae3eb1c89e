#include "ecl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "ecl/errors.hpp"

namespace ecl {

namespace {

constexpr char kMagic[4] = {'E', 'C', 'L', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    put_u64(out, bits);
}

void put_string(std::vector<unsigned char>& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

struct Reader {
    const std::vector<unsigned char>& buf;
    const std::string& path;
    std::size_t pos = 0;

    void need(std::size_t count) const {
        if (pos + count > buf.size())
            throw FormatError(path + ": truncated at byte offset " + std::to_string(pos));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, sizeof d);
        return d;
    }
    std::string str() {
        const std::uint32_t len = u32();
        need(len);
        std::string s(buf.begin() + pos, buf.begin() + pos + len);
        pos += len;
        return s;
    }
};

}  // namespace

const ParamVector& CheckpointFile::find(const std::string& label) const {
    for (const LabeledCheckpoint& e : entries)
        if (e.label == label) return e.params;
    throw InputError("checkpoint file has no entry labeled " + label);
}

void save_checkpoint(const std::string& path, const CheckpointFile& file) {
    // collect distinct layouts (compared structurally)
    std::vector<LayoutPtr> layouts;
    std::vector<std::size_t> layout_of(file.entries.size());
    for (std::size_t i = 0; i < file.entries.size(); ++i) {
        const LayoutPtr& l = file.entries[i].params.layout;
        if (!l) throw InputError("save_checkpoint: entry without a layout");
        std::size_t idx = layouts.size();
        for (std::size_t j = 0; j < layouts.size(); ++j)
            if (*layouts[j] == *l) {
                idx = j;
                break;
            }
        if (idx == layouts.size()) layouts.push_back(l);
        layout_of[i] = idx;
    }

    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, file.n);
    put_u32(out, file.T);
    put_u32(out, static_cast<std::uint32_t>(layouts.size()));
    for (const LayoutPtr& l : layouts) {
        put_u32(out, static_cast<std::uint32_t>(l->entries().size()));
        for (const ParamEntry& e : l->entries()) {
            put_string(out, e.name);
            put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
            for (std::size_t d : e.shape) put_u64(out, d);
        }
    }
    put_u32(out, static_cast<std::uint32_t>(file.entries.size()));
    for (std::size_t i = 0; i < file.entries.size(); ++i) {
        const LabeledCheckpoint& e = file.entries[i];
        put_string(out, e.label);
        put_u32(out, static_cast<std::uint32_t>(layout_of[i]));
        put_u64(out, e.params.data.size());
        for (double d : e.params.data) put_f64(out, d);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
    if (!f) throw FormatError("failed writing " + path);
}

CheckpointFile load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    Reader r{buf, path};

    r.need(4);
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw FormatError(path + ": bad magic at byte offset 0 (want \"ECLW\")");
    r.pos = 4;
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version));

    CheckpointFile file;
    file.n = r.u32();
    file.T = r.u32();

    const std::uint32_t num_layouts = r.u32();
    std::vector<LayoutPtr> layouts;
    layouts.reserve(num_layouts);
    for (std::uint32_t i = 0; i < num_layouts; ++i) {
        auto layout = std::make_shared<ParamLayout>();
        const std::uint32_t num_entries = r.u32();
        for (std::uint32_t j = 0; j < num_entries; ++j) {
            std::string name = r.str();
            const std::uint32_t ndims = r.u32();
            std::vector<std::size_t> shape(ndims);
            for (std::uint32_t d = 0; d < ndims; ++d)
                shape[d] = static_cast<std::size_t>(r.u64());
            layout->add(std::move(name), std::move(shape));
        }
        layouts.push_back(std::move(layout));
    }

    const std::uint32_t num_vectors = r.u32();
    for (std::uint32_t i = 0; i < num_vectors; ++i) {
        std::string label = r.str();
        const std::uint32_t layout_idx = r.u32();
        if (layout_idx >= layouts.size())
            throw FormatError(path + ": layout index out of range at byte offset " +
                              std::to_string(r.pos - 4));
        const std::uint64_t count = r.u64();
        if (count != layouts[layout_idx]->total())
            throw FormatError(path + ": vector \"" + label + "\" has " + std::to_string(count) +
                              " values, layout expects " +
                              std::to_string(layouts[layout_idx]->total()));
        std::vector<double> data(count);
        for (std::uint64_t j = 0; j < count; ++j) data[j] = r.f64();
        file.entries.push_back(
            LabeledCheckpoint{std::move(label), ParamVector(layouts[layout_idx], std::move(data))});
    }
    if (r.pos != buf.size())
        throw FormatError(path + ": trailing bytes at offset " + std::to_string(r.pos));
    return file;
}

}  // namespace ecl
