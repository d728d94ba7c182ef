#pragma once

#include <cstddef>

namespace hazardtm {

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    void add(bool gold, bool predicted) {
        if (predicted) {
            gold ? ++tp : ++fp;
        } else {
            gold ? ++fn : ++tn;
        }
    }
    bool operator==(const Confusion&) const = default;
};

/// Positive-class scores. A zero denominator yields 0 and sets the flag.
struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;

    bool degenerate() const { return precision_undefined || recall_undefined || f1_undefined; }
};

inline Metrics compute_metrics(const Confusion& c) {
    Metrics m;
    if (c.tp + c.fp == 0) {
        m.precision_undefined = true;
    } else {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    }
    if (c.tp + c.fn == 0) {
        m.recall_undefined = true;
    } else {
        m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    if (m.precision + m.recall == 0.0) {
        m.f1_undefined = true;
    } else {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

}  // namespace hazardtm
