#include "infnet/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace infnet {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'F', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) fail("checkpoint: truncated file");
    return v;
}

void write_str(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& is) {
    auto n = read_pod<std::uint32_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) fail("checkpoint: truncated string");
    return s;
}

}  // namespace

const Checkpoint::Entry* Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

const std::string* Checkpoint::find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return &v;
    return nullptr;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail("cannot write checkpoint '%s'", path.c_str());
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kVersion);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        write_str(os, k);
        write_str(os, v);
    }
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        write_str(os, e.name);
        write_str(os, e.dtype);
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) write_pod<std::uint64_t>(os, d);
        write_pod<std::uint64_t>(os, e.values.size());
        os.write(reinterpret_cast<const char*>(e.values.data()),
                 static_cast<std::streamsize>(e.values.size() * sizeof(double)));
    }
    if (!os) fail("write failed for checkpoint '%s'", path.c_str());

    std::ofstream mf(path + ".manifest");
    if (!mf) fail("cannot write manifest for '%s'", path.c_str());
    mf << "# name shape dtype\n";
    for (const auto& e : entries) {
        mf << e.name << ' ' << shape_str(e.shape) << ' ' << e.dtype << '\n';
    }
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open checkpoint '%s'", path.c_str());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        fail("checkpoint '%s': bad magic header", path.c_str());
    auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion)
        fail("checkpoint '%s': version %u unsupported (expected %u)", path.c_str(), version,
             kVersion);
    Checkpoint ck;
    auto nmeta = read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < nmeta; ++i) {
        auto k = read_str(is);
        auto v = read_str(is);
        ck.meta.emplace_back(std::move(k), std::move(v));
    }
    auto n = read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < n; ++i) {
        Checkpoint::Entry e;
        e.name = read_str(is);
        e.dtype = read_str(is);
        auto rank = read_pod<std::uint32_t>(is);
        e.shape.resize(rank);
        for (auto& d : e.shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
        auto count = read_pod<std::uint64_t>(is);
        e.values.resize(count);
        is.read(reinterpret_cast<char*>(e.values.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!is) fail("checkpoint '%s': truncated tensor data", path.c_str());
        ck.entries.push_back(std::move(e));
    }
    return ck;
}

}  // namespace infnet
