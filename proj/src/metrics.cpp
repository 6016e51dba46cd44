#include "miniseg/metrics.hpp"

#include <stdexcept>
#include <string>

namespace miniseg {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

Confusion confusion(const Tensor& pred_prob, const Tensor& mask, double threshold) {
    if (pred_prob.shape() != mask.shape()) {
        throw std::invalid_argument("confusion: prediction " + to_string(pred_prob.shape()) +
                                    " vs mask " + to_string(mask.shape()));
    }
    Confusion c;
    for (std::size_t i = 0; i < mask.numel(); ++i) {
        const double m = mask[i];
        if (m != 0.0 && m != 1.0) {
            throw std::invalid_argument("confusion: mask value at index " + std::to_string(i) +
                                        " is not 0 or 1");
        }
        const bool pred = pred_prob[i] >= threshold;
        const bool truth = m == 1.0;
        if (pred && truth) ++c.tp;
        else if (pred) ++c.fp;
        else if (truth) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double precision(const Confusion& c) { return ratio(double(c.tp), double(c.tp + c.fp)); }

double recall(const Confusion& c) { return ratio(double(c.tp), double(c.tp + c.fn)); }

double f_score(const Confusion& c) {
    const double p = precision(c);
    const double r = recall(c);
    if (p == 0.0 || r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

double dice(const Confusion& c) {
    return ratio(2.0 * double(c.tp), 2.0 * double(c.tp) + double(c.fp) + double(c.fn));
}

double iou(const Confusion& c) { return ratio(double(c.tp), double(c.tp + c.fp + c.fn)); }

double accuracy(const Confusion& c) { return ratio(double(c.tp + c.tn), double(c.total())); }

}  // namespace miniseg
