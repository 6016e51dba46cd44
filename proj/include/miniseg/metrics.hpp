#pragma once

#include <cstdint>

#include "miniseg/tensor.hpp"

namespace miniseg {

// Pixel confusion counts. Metrics with a zero denominator evaluate to 0.
struct Confusion {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
    Confusion& operator+=(const Confusion& o) noexcept {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    bool operator==(const Confusion&) const = default;
};

// A pixel is predicted positive when prob >= threshold.
Confusion confusion(const Tensor& pred_prob, const Tensor& mask, double threshold = 0.5);

double precision(const Confusion& c);
double recall(const Confusion& c);
// Harmonic mean of precision and recall.
double f_score(const Confusion& c);
double dice(const Confusion& c);
double iou(const Confusion& c);
double accuracy(const Confusion& c);

}  // namespace miniseg
