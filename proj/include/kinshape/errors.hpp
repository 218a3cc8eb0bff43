#pragma once

#include <stdexcept>
#include <string>

namespace kinshape {

// Error taxonomy shared by the whole library. The CLI maps these onto
// process exit codes (see tools/): data and format problems -> 3,
// numerical degeneracy -> 4, training divergence -> 5.

class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand dimensions do not line up (matmul shapes, vector lengths, ...).
class shape_error : public error {
public:
    using error::error;
};

// Input values are malformed: non-finite entries, labels out of range.
class invalid_input_error : public error {
public:
    using error::error;
};

// Landmark shape is (numerically) rank deficient: collinear landmarks.
class degenerate_shape_error : public error {
public:
    using error::error;
};

// Singular values too close for the coupled rotation solve; callers may
// fall back to the Gram-based backward path.
class degenerate_spectrum_error : public error {
public:
    using error::error;
};

class config_error : public error {
public:
    using error::error;
};

class data_error : public error {
public:
    using error::error;
};

// Parse failure in one of the text formats; message carries the line number.
class format_error : public error {
public:
    using error::error;
};

// A cache or handle no longer matches the object it was built from.
class state_error : public error {
public:
    using error::error;
};

class io_error : public error {
public:
    using error::error;
};

// Training produced a non-finite loss.
class divergence_error : public error {
public:
    divergence_error(const std::string& what, std::size_t epoch)
        : error(what), epoch_(epoch) {}

    std::size_t epoch() const { return epoch_; }

private:
    std::size_t epoch_;
};

} // namespace kinshape
