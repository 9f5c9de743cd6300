#include "pavad/flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include <opencv2/imgproc.hpp>

namespace pavad {

namespace {

cv::Mat to_gray(const Tensorf& frame) {
    require(frame.rank() == 3 && frame.dim(0) == kChannels, ErrorKind::Flow, "flow expects 3 x H x W frames");
    const int h = frame.dim(1), w = frame.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    cv::Mat g(h, w, CV_32F);
    for (int y = 0; y < h; ++y) {
        auto* row = g.ptr<float>(y);
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const float v = 0.299f * frame[i] + 0.587f * frame[plane + i] + 0.114f * frame[2 * plane + i];
            row[x] = (v + 1.0f) * 127.5f;
        }
    }
    return g;
}

void centered_gradient(const cv::Mat& img, cv::Mat& dx, cv::Mat& dy) {
    const int h = img.rows, w = img.cols;
    dx.create(h, w, CV_32F);
    dy.create(h, w, CV_32F);
    for (int y = 0; y < h; ++y) {
        const float* r = img.ptr<float>(y);
        const float* up = img.ptr<float>(std::max(y - 1, 0));
        const float* dn = img.ptr<float>(std::min(y + 1, h - 1));
        float* gx = dx.ptr<float>(y);
        float* gy = dy.ptr<float>(y);
        for (int x = 0; x < w; ++x) {
            const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
            gx[x] = (r[xr] - r[xl]) / static_cast<float>(std::max(1, xr - xl));
            gy[x] = (dn[x] - up[x]) / static_cast<float>(std::max(1, std::min(y + 1, h - 1) - std::max(y - 1, 0)));
        }
    }
}

// Forward differences with zero at the far border.
void forward_gradient(const cv::Mat& f, cv::Mat& fx, cv::Mat& fy) {
    const int h = f.rows, w = f.cols;
    fx.create(h, w, CV_32F);
    fy.create(h, w, CV_32F);
    for (int y = 0; y < h; ++y) {
        const float* r = f.ptr<float>(y);
        const float* dn = f.ptr<float>(std::min(y + 1, h - 1));
        float* gx = fx.ptr<float>(y);
        float* gy = fy.ptr<float>(y);
        for (int x = 0; x < w; ++x) {
            gx[x] = x + 1 < w ? r[x + 1] - r[x] : 0.0f;
            gy[x] = y + 1 < h ? dn[x] - r[x] : 0.0f;
        }
    }
}

// Backward-difference divergence, the negative adjoint of forward_gradient.
void divergence(const cv::Mat& v1, const cv::Mat& v2, cv::Mat& div) {
    const int h = v1.rows, w = v1.cols;
    div.create(h, w, CV_32F);
    for (int y = 0; y < h; ++y) {
        const float* a = v1.ptr<float>(y);
        const float* b = v2.ptr<float>(y);
        const float* bu = v2.ptr<float>(std::max(y - 1, 0));
        float* d = div.ptr<float>(y);
        for (int x = 0; x < w; ++x) {
            float dxv = (x == 0) ? a[x] : (x == w - 1 ? -a[x - 1] : a[x] - a[x - 1]);
            float dyv = (y == 0) ? b[x] : (y == h - 1 ? -bu[x] : b[x] - bu[x]);
            d[x] = dxv + dyv;
        }
    }
}

cv::Mat warp(const cv::Mat& img, const cv::Mat& u1, const cv::Mat& u2) {
    cv::Mat mx(img.size(), CV_32F), my(img.size(), CV_32F);
    for (int y = 0; y < img.rows; ++y) {
        const float* a = u1.ptr<float>(y);
        const float* b = u2.ptr<float>(y);
        float* px = mx.ptr<float>(y);
        float* py = my.ptr<float>(y);
        for (int x = 0; x < img.cols; ++x) {
            px[x] = static_cast<float>(x) + a[x];
            py[x] = static_cast<float>(y) + b[x];
        }
    }
    cv::Mat out;
    cv::remap(img, out, mx, my, cv::INTER_LINEAR, cv::BORDER_REPLICATE);
    return out;
}

cv::Mat smooth(const cv::Mat& img, double sigma) {
    if (sigma <= 0) return img.clone();
    cv::Mat out;
    cv::GaussianBlur(img, out, cv::Size(0, 0), sigma, sigma, cv::BORDER_REPLICATE);
    return out;
}

}  // namespace

Tensorf TvL1Flow::estimate(const Tensorf& from, const Tensorf& to) const {
    require(from.shape() == to.shape(), ErrorKind::Flow, "flow frames must share a shape");
    const int h = from.dim(1), w = from.dim(2);

    int scales = p_.scales;
    if (scales <= 0) {
        scales = 1;
        double side = std::min(h, w);
        while (side * p_.zoom >= 16.0) {
            side *= p_.zoom;
            ++scales;
        }
    }

    std::vector<cv::Mat> i0(scales), i1(scales);
    i0[0] = smooth(to_gray(from), p_.presmooth_sigma);
    i1[0] = smooth(to_gray(to), p_.presmooth_sigma);
    for (int s = 1; s < scales; ++s) {
        const cv::Size sz(std::max(1, static_cast<int>(std::lround(i0[s - 1].cols * p_.zoom))),
                          std::max(1, static_cast<int>(std::lround(i0[s - 1].rows * p_.zoom))));
        cv::resize(smooth(i0[s - 1], p_.presmooth_sigma), i0[s], sz, 0, 0, cv::INTER_LINEAR);
        cv::resize(smooth(i1[s - 1], p_.presmooth_sigma), i1[s], sz, 0, 0, cv::INTER_LINEAR);
    }

    const float lt = static_cast<float>(p_.lambda * p_.theta);
    const float theta = static_cast<float>(p_.theta);
    const float taut = static_cast<float>(p_.tau / p_.theta);
    const float eps2 = static_cast<float>(p_.epsilon * p_.epsilon);
    constexpr float kGradIsZero = 1e-10f;

    cv::Mat u1, u2, p11, p12, p21, p22;
    for (int s = scales - 1; s >= 0; --s) {
        const cv::Size sz = i0[s].size();
        if (s == scales - 1) {
            u1 = cv::Mat::zeros(sz, CV_32F);
            u2 = cv::Mat::zeros(sz, CV_32F);
            p11 = cv::Mat::zeros(sz, CV_32F);
            p12 = cv::Mat::zeros(sz, CV_32F);
            p21 = cv::Mat::zeros(sz, CV_32F);
            p22 = cv::Mat::zeros(sz, CV_32F);
        } else {
            const double fx = static_cast<double>(sz.width) / u1.cols, fy = static_cast<double>(sz.height) / u1.rows;
            auto up = [&](cv::Mat& m, double factor) {
                cv::Mat r;
                cv::resize(m, r, sz, 0, 0, cv::INTER_LINEAR);
                m = r * factor;
            };
            up(u1, fx);
            up(u2, fy);
            up(p11, 1.0);
            up(p12, 1.0);
            up(p21, 1.0);
            up(p22, 1.0);
        }

        cv::Mat i1x, i1y;
        centered_gradient(i1[s], i1x, i1y);
        const int n = sz.area();
        cv::Mat v1(sz, CV_32F), v2(sz, CV_32F), div1, div2, u1x, u1y, u2x, u2y;

        for (int wi = 0; wi < p_.warps; ++wi) {
            const cv::Mat i1w = warp(i1[s], u1, u2);
            const cv::Mat i1wx = warp(i1x, u1, u2);
            const cv::Mat i1wy = warp(i1y, u1, u2);
            cv::Mat grad(sz, CV_32F), rho_c(sz, CV_32F);
            {
                const float *wx = i1wx.ptr<float>(), *wy = i1wy.ptr<float>(), *iw = i1w.ptr<float>();
                const float *a = u1.ptr<float>(), *b = u2.ptr<float>(), *base = i0[s].ptr<float>();
                float *g = grad.ptr<float>(), *rc = rho_c.ptr<float>();
                for (int i = 0; i < n; ++i) {
                    g[i] = wx[i] * wx[i] + wy[i] * wy[i];
                    rc[i] = iw[i] - wx[i] * a[i] - wy[i] * b[i] - base[i];
                }
            }

            float error = std::numeric_limits<float>::max();
            for (int it = 0; it < p_.max_iterations && error > eps2; ++it) {
                {
                    const float *wx = i1wx.ptr<float>(), *wy = i1wy.ptr<float>();
                    const float *g = grad.ptr<float>(), *rc = rho_c.ptr<float>();
                    const float *a = u1.ptr<float>(), *b = u2.ptr<float>();
                    float *va = v1.ptr<float>(), *vb = v2.ptr<float>();
                    for (int i = 0; i < n; ++i) {
                        const float rho = rc[i] + wx[i] * a[i] + wy[i] * b[i];
                        float d1 = 0.0f, d2 = 0.0f;
                        if (rho < -lt * g[i]) {
                            d1 = lt * wx[i];
                            d2 = lt * wy[i];
                        } else if (rho > lt * g[i]) {
                            d1 = -lt * wx[i];
                            d2 = -lt * wy[i];
                        } else if (g[i] > kGradIsZero) {
                            const float f = -rho / g[i];
                            d1 = f * wx[i];
                            d2 = f * wy[i];
                        }
                        va[i] = a[i] + d1;
                        vb[i] = b[i] + d2;
                    }
                }
                divergence(p11, p12, div1);
                divergence(p21, p22, div2);
                error = 0.0f;
                {
                    float *a = u1.ptr<float>(), *b = u2.ptr<float>();
                    const float *va = v1.ptr<float>(), *vb = v2.ptr<float>();
                    const float *da = div1.ptr<float>(), *db = div2.ptr<float>();
                    for (int i = 0; i < n; ++i) {
                        const float na = va[i] + theta * da[i];
                        const float nb = vb[i] + theta * db[i];
                        error += (na - a[i]) * (na - a[i]) + (nb - b[i]) * (nb - b[i]);
                        a[i] = na;
                        b[i] = nb;
                    }
                }
                error /= static_cast<float>(n);

                forward_gradient(u1, u1x, u1y);
                forward_gradient(u2, u2x, u2y);
                {
                    float *q11 = p11.ptr<float>(), *q12 = p12.ptr<float>();
                    float *q21 = p21.ptr<float>(), *q22 = p22.ptr<float>();
                    const float *ax = u1x.ptr<float>(), *ay = u1y.ptr<float>();
                    const float *bx = u2x.ptr<float>(), *by = u2y.ptr<float>();
                    for (int i = 0; i < n; ++i) {
                        const float ng1 = 1.0f + taut * std::sqrt(ax[i] * ax[i] + ay[i] * ay[i]);
                        const float ng2 = 1.0f + taut * std::sqrt(bx[i] * bx[i] + by[i] * by[i]);
                        q11[i] = (q11[i] + taut * ax[i]) / ng1;
                        q12[i] = (q12[i] + taut * ay[i]) / ng1;
                        q21[i] = (q21[i] + taut * bx[i]) / ng2;
                        q22[i] = (q22[i] + taut * by[i]) / ng2;
                    }
                }
            }
        }
    }

    Tensorf out({2, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            out[static_cast<std::size_t>(y) * w + x] = u1.at<float>(y, x);
            out[plane + static_cast<std::size_t>(y) * w + x] = u2.at<float>(y, x);
        }
    return out;
}

FlowField compute_flow(const VideoClip& clip, const FlowBackend& backend) {
    require(clip.length() >= 2, ErrorKind::Flow,
            "video '" + clip.video_id() + "' has " + std::to_string(clip.length()) + " frame(s); flow needs >= 2");
    const int maps = clip.length() - 1, h = clip.height(), w = clip.width();
    FlowField flow{Tensorf({maps, 2, h, w}), clip.video_id()};
    const std::size_t n = static_cast<std::size_t>(2) * h * w;
    for (int t = 0; t < maps; ++t) {
        const Tensorf m = backend.estimate(clip.frame(t), clip.frame(t + 1));
        require(m.shape() == std::vector<int>{2, h, w}, ErrorKind::Flow, "flow backend returned a wrong shape");
        for (float v : m.values()) require(std::isfinite(v), ErrorKind::Flow, "flow backend returned non-finite values");
        std::copy(m.values().begin(), m.values().end(), flow.values.data() + t * n);
    }
    return flow;
}

Tensorf pad_flow_to_frames(const FlowField& flow) {
    const int maps = flow.maps(), h = flow.height(), w = flow.width();
    const std::size_t n = static_cast<std::size_t>(2) * h * w;
    Tensorf out({maps + 1, 2, h, w});
    std::copy(flow.values.values().begin(), flow.values.values().end(), out.data());
    std::copy(flow.values.data() + (maps - 1) * n, flow.values.data() + maps * n, out.data() + maps * n);
    return out;
}

Tensorf FlowCodec::encode(const Tensorf& flow) const {
    require(flow.rank() == 4 && flow.dim(1) == 2, ErrorKind::Shape, "flow must be T x 2 x H x W");
    const int t = flow.dim(0), h = flow.dim(2), w = flow.dim(3), c = channels();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensorf out({t, c, h, w});
    for (int k = 0; k < t; ++k)
        for (int ch = 0; ch < 2; ++ch) {
            const float* src = flow.data() + (static_cast<std::size_t>(k) * 2 + ch) * plane;
            float* dst = out.data() + (static_cast<std::size_t>(k) * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = std::clamp(src[i], -max_px, max_px) / max_px;
        }
    return out;
}

Tensorf FlowCodec::decode(const Tensorf& coded) const {
    require(coded.rank() == 4 && coded.dim(1) == channels(), ErrorKind::Shape, "coded flow has wrong channel count");
    const int t = coded.dim(0), h = coded.dim(2), w = coded.dim(3), c = channels();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensorf out({t, 2, h, w});
    for (int k = 0; k < t; ++k)
        for (int ch = 0; ch < 2; ++ch) {
            const float* src = coded.data() + (static_cast<std::size_t>(k) * c + ch) * plane;
            float* dst = out.data() + (static_cast<std::size_t>(k) * 2 + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * max_px;
        }
    return out;
}

static_assert(std::endian::native == std::endian::little, "flow files assume a little-endian host");

void save_flow(const fs::path& file, const FlowField& flow) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    require(out.good(), ErrorKind::Flow, "cannot write flow file " + file.string());
    const std::uint32_t header[3] = {static_cast<std::uint32_t>(flow.maps()), static_cast<std::uint32_t>(flow.height()),
                                     static_cast<std::uint32_t>(flow.width())};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    out.write(reinterpret_cast<const char*>(flow.values.data()),
              static_cast<std::streamsize>(flow.values.size() * sizeof(float)));
}

FlowField load_flow(const fs::path& file, std::string video_id) {
    std::ifstream in(file, std::ios::binary);
    require(in.good(), ErrorKind::Flow, "cannot open flow file " + file.string());
    std::uint32_t header[3] = {0, 0, 0};
    in.read(reinterpret_cast<char*>(header), sizeof header);
    require(in.good() && header[0] > 0 && header[1] > 0 && header[2] > 0, ErrorKind::Flow,
            "bad flow header in " + file.string());
    FlowField flow{Tensorf({static_cast<int>(header[0]), 2, static_cast<int>(header[1]), static_cast<int>(header[2])}),
                   video_id.empty() ? file.stem().string() : std::move(video_id)};
    in.read(reinterpret_cast<char*>(flow.values.data()),
            static_cast<std::streamsize>(flow.values.size() * sizeof(float)));
    require(in.gcount() == static_cast<std::streamsize>(flow.values.size() * sizeof(float)), ErrorKind::Flow,
            "truncated flow file " + file.string());
    return flow;
}

}  // namespace pavad
