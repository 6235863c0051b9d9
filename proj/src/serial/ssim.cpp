#include <cmath>

#include "tomopet/error.hpp"
#include "tomopet/serial.hpp"
#include "tomopet/uq.hpp"

namespace tomopet::serial {

double ssim(const Image& reference, const Image& estimate, double data_range) {
    if (reference.width() != estimate.width() || reference.height() != estimate.height())
        throw ValidationError("ssim: image dimensions differ");
    if (!(data_range > 0.0)) throw ValidationError("data_range must be positive");
    const int w = int(reference.width()), h = int(reference.height());
    if (w < kSsimWindow || h < kSsimWindow) throw ValidationError("ssim: images must be at least 11x11");
    const int half = kSsimWindow / 2;
    double kernel[kSsimWindow][kSsimWindow];
    double ksum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i)
        for (int j = 0; j < kSsimWindow; ++j) {
            const double r2 = double((i - half) * (i - half) + (j - half) * (j - half));
            kernel[i][j] = std::exp(-r2 / (2.0 * kSsimSigma * kSsimSigma));
            ksum += kernel[i][j];
        }
    const double c1 = (kSsimK1 * data_range) * (kSsimK1 * data_range);
    const double c2 = (kSsimK2 * data_range) * (kSsimK2 * data_range);
    double total = 0.0;
    int count = 0;
    for (int r0 = 0; r0 + kSsimWindow <= h; ++r0)
        for (int c0 = 0; c0 + kSsimWindow <= w; ++c0) {
            double mx = 0, my = 0;
            for (int i = 0; i < kSsimWindow; ++i)
                for (int j = 0; j < kSsimWindow; ++j) {
                    const double k = kernel[i][j] / ksum;
                    mx += k * reference.at(c0 + j, r0 + i);
                    my += k * estimate.at(c0 + j, r0 + i);
                }
            double vx = 0, vy = 0, cxy = 0;
            for (int i = 0; i < kSsimWindow; ++i)
                for (int j = 0; j < kSsimWindow; ++j) {
                    const double k = kernel[i][j] / ksum;
                    const double dx = reference.at(c0 + j, r0 + i) - mx;
                    const double dy = estimate.at(c0 + j, r0 + i) - my;
                    vx += k * dx * dx;
                    vy += k * dy * dy;
                    cxy += k * dx * dy;
                }
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / count;
}

} // namespace tomopet::serial
