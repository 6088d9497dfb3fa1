///
/// \file error.hpp
///
/// Exception hierarchy shared by every tempus_fri module.
///
#ifndef TEMPUS_FRI_ERROR_HPP
#define TEMPUS_FRI_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tempus_fri
{

/// Base class of all library errors.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument value or shape.
class ArgumentError : public Error
{
public:
    using Error::Error;
};

/// Inconsistent configuration (mismatched periods, duplicated channels, ...).
class ConfigurationError : public Error
{
public:
    using Error::Error;
};

/// A tabulated pulse spectrum was queried at an index it does not cover.
class SpectrumCoverageError : public Error
{
public:
    using Error::Error;
};

/// A documented precondition of an encoder or checker does not hold.
class PreconditionError : public Error
{
public:
    using Error::Error;
};

/// The crossing detector found no crossings in one period.
class EmptyTriggerError : public Error
{
public:
    using Error::Error;
};

/// The integrate-and-fire machine produced fewer than two triggers.
class InsufficientTriggerError : public Error
{
public:
    using Error::Error;
};

/// Two channels produced coincident trigger times.
class DegenerateSamplingError : public Error
{
public:
    using Error::Error;
};

/// Pivoted elimination met a zero pivot.
class SingularSystemError : public Error
{
public:
    using Error::Error;
};

/// Annihilating filter with a vanishing leading coefficient.
class DegenerateFilterError : public Error
{
public:
    using Error::Error;
};

/// Null space of the Toeplitz matrix is not one dimensional.
class CoincidentShiftError : public Error
{
public:
    using Error::Error;
};

/// Pulse spectrum vanishes on every usable harmonic.
class DegeneratePulseError : public Error
{
public:
    using Error::Error;
};

/// Fewer measurements than unknowns.
class InsufficientMeasurementsError : public Error
{
public:
    InsufficientMeasurementsError(std::size_t rows, std::size_t cols)
        : Error("underdetermined system: " + std::to_string(rows) +
                " measurements for " + std::to_string(cols) +
                " unknowns (deficit " + std::to_string(cols - rows) + ")"),
          m_deficit(cols - rows)
    {
    }

    std::size_t deficit() const noexcept
    {
        return m_deficit;
    }

private:
    std::size_t m_deficit;
};

/// File input/output failure; the message carries the path.
class IoError : public Error
{
public:
    using Error::Error;
};

} // namespace tempus_fri

#endif // TEMPUS_FRI_ERROR_HPP
