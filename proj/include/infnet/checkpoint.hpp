#pragma once

#include <string>
#include <utility>
#include <vector>

#include "infnet/autodiff.hpp"

namespace infnet {

// Versioned binary blob of named shaped arrays plus a textual manifest
// (written next to the blob as <path>.manifest).
struct Checkpoint {
    // extra free-form metadata lines stored verbatim (e.g. the model config)
    std::vector<std::pair<std::string, std::string>> meta;
    struct Entry {
        std::string name;
        std::vector<std::size_t> shape;
        std::string dtype;  // "f32" or "f64"
        std::vector<double> values;
    };
    std::vector<Entry> entries;

    const Entry* find(const std::string& name) const;
    const std::string* find_meta(const std::string& key) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

template <class Real>
void checkpoint_add(Checkpoint& ck, const std::string& name, const Tensor<Real>& t) {
    Checkpoint::Entry e;
    e.name = name;
    e.shape = t.shape();
    e.dtype = sizeof(Real) == 4 ? "f32" : "f64";
    e.values.assign(t.values().begin(), t.values().end());
    ck.entries.push_back(std::move(e));
}

template <class Real>
void checkpoint_restore(const Checkpoint& ck, const std::string& name, Tensor<Real>& t) {
    const auto* e = ck.find(name);
    if (!e) fail("checkpoint: missing tensor '%s'", name.c_str());
    if (e->shape != t.shape())
        fail("checkpoint: tensor '%s' has shape %s, expected %s", name.c_str(),
             shape_str(e->shape).c_str(), shape_str(t.shape()).c_str());
    for (std::size_t i = 0; i < t.size(); ++i) t.set_value(i, Real(e->values[i]));
}

}  // namespace infnet
