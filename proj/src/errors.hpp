#ifndef VXR_ERRORS_HPP
#define VXR_ERRORS_HPP

#include <sstream>
#include <stdexcept>
#include <string>

namespace vxr {

// Error taxonomy mirrors the process exit codes: usage=1, data=2, numeric=3.
struct usage_error : std::runtime_error {
    explicit usage_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vxr

#define VXR_CHECK_IMPL(cond, extype, streamed)           \
    do {                                                 \
        if (!(cond)) {                                   \
            std::ostringstream vxr_check_oss_;           \
            vxr_check_oss_ << streamed;                  \
            throw extype(vxr_check_oss_.str());          \
        }                                                \
    } while (0)

#define VXR_CHECK(cond, streamed) VXR_CHECK_IMPL(cond, std::runtime_error, streamed)
#define VXR_CHECK_DATA(cond, streamed) VXR_CHECK_IMPL(cond, ::vxr::data_error, streamed)
#define VXR_CHECK_USAGE(cond, streamed) VXR_CHECK_IMPL(cond, ::vxr::usage_error, streamed)
#define VXR_CHECK_NUMERIC(cond, streamed) VXR_CHECK_IMPL(cond, ::vxr::numeric_error, streamed)

#endif
