#ifndef TEMPUS_FRI_TEMPUS_FRI_HPP
#define TEMPUS_FRI_TEMPUS_FRI_HPP

#include <tempus_fri/error.hpp>
#include <tempus_fri/signal_model.hpp>
#include <tempus_fri/numerics.hpp>
#include <tempus_fri/tem_encoders.hpp>
#include <tempus_fri/reconstruction.hpp>
#include <tempus_fri/experiments.hpp>

#endif // TEMPUS_FRI_TEMPUS_FRI_HPP
