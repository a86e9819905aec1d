#pragma once

#include "psumodem/audio.hpp"
#include "psumodem/channel.hpp"
#include "psumodem/fft.hpp"
#include "psumodem/framing.hpp"
#include "psumodem/modem.hpp"
#include "psumodem/receiver.hpp"
#include "psumodem/scheduler.hpp"
#include "psumodem/types.hpp"
#include "psumodem/wav.hpp"
