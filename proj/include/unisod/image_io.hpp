#pragma once

#include <filesystem>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "unisod/image.hpp"

// File decoding/encoding and loader-side resizing sit on OpenCV; everything
// downstream of the loader works on plain double buffers.

namespace unisod::img {

inline void init_cv_runtime() {
    static const bool once = [] {
        cv::setNumThreads(1);
        return true;
    }();
    (void)once;
}

// 3-channel image in [0,1], RGB channel order.
inline ImageF load_rgb(const std::filesystem::path& path) {
    init_cv_runtime();
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) throw DataError("cannot read image: " + path.string());
    ImageF out(3, m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        const cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < m.cols; ++x) {
            out.at(0, y, x) = row[x][2] / 255.0;
            out.at(1, y, x) = row[x][1] / 255.0;
            out.at(2, y, x) = row[x][0] / 255.0;
        }
    }
    return out;
}

// Single-channel map scaled by the nominal bit depth (8-bit /255, 16-bit /65535).
// Multi-channel files are collapsed by channel mean first.
inline GrayF load_gray(const std::filesystem::path& path) {
    init_cv_runtime();
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) throw DataError("cannot read image: " + path.string());
    cv::Mat m64;
    if (m.channels() > 1) {
        std::vector<cv::Mat> planes;
        cv::split(m, planes);
        cv::Mat acc = cv::Mat::zeros(m.rows, m.cols, CV_64F);
        int used = std::min<int>(3, static_cast<int>(planes.size()));
        for (int c = 0; c < used; ++c) {
            cv::Mat p64;
            planes[c].convertTo(p64, CV_64F);
            acc += p64;
        }
        acc /= used;
        m64 = acc;
    } else {
        m.convertTo(m64, CV_64F);
    }
    double scale = m.depth() == CV_16U ? 65535.0 : 255.0;
    GrayF out(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) out.at(y, x) = m64.at<double>(y, x) / scale;
    return out;
}

inline void save_gray_u8(const std::filesystem::path& path, const GrayF& im) {
    init_cv_runtime();
    cv::Mat m(im.height, im.width, CV_8U);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            double v = std::clamp(im.at(y, x), 0.0, 1.0);
            m.at<uint8_t>(y, x) = static_cast<uint8_t>(std::lround(v * 255.0));
        }
    if (!cv::imwrite(path.string(), m))
        throw DataError("cannot write image: " + path.string());
}

inline void save_rgb_u8(const std::filesystem::path& path, const ImageF& im) {
    init_cv_runtime();
    require(im.channels == 3, "save_rgb_u8: expected 3 channels");
    cv::Mat m(im.height, im.width, CV_8UC3);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            auto q = [&](int c) {
                double v = std::clamp(im.at(c, y, x), 0.0, 1.0);
                return static_cast<uint8_t>(std::lround(v * 255.0));
            };
            m.at<cv::Vec3b>(y, x) = cv::Vec3b(q(2), q(1), q(0));
        }
    if (!cv::imwrite(path.string(), m))
        throw DataError("cannot write image: " + path.string());
}

inline void save_gray_u16(const std::filesystem::path& path, const GrayF& im) {
    init_cv_runtime();
    cv::Mat m(im.height, im.width, CV_16U);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
            double v = std::clamp(im.at(y, x), 0.0, 1.0);
            m.at<uint16_t>(y, x) = static_cast<uint16_t>(std::lround(v * 65535.0));
        }
    if (!cv::imwrite(path.string(), m))
        throw DataError("cannot write image: " + path.string());
}

inline GrayF resize_bilinear(const GrayF& in, int oh, int ow) {
    init_cv_runtime();
    if (in.height == oh && in.width == ow) return in;
    cv::Mat src(in.height, in.width, CV_64F, const_cast<double*>(in.v.data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(ow, oh), 0, 0, cv::INTER_LINEAR);
    GrayF out(oh, ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) out.at(y, x) = dst.at<double>(y, x);
    return out;
}

inline ImageF resize_bilinear(const ImageF& in, int oh, int ow) {
    if (in.height == oh && in.width == ow) return in;
    ImageF out(in.channels, oh, ow);
    for (int c = 0; c < in.channels; ++c) {
        GrayF plane = channel(in, c);
        GrayF r = resize_bilinear(plane, oh, ow);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) out.at(c, y, x) = r.at(y, x);
    }
    return out;
}

}  // namespace unisod::img
