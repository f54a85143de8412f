#pragma once

#include "dcapep/ext_value.hpp"
#include "dcapep/instances.hpp"
#include "dcapep/dca.hpp"
#include "dcapep/analysis.hpp"
#include "dcapep/bounds.hpp"
#include "dcapep/sdp.hpp"
#include "dcapep/sdpa.hpp"
#include "dcapep/pep.hpp"
#include "dcapep/certify.hpp"
#include "dcapep/config.hpp"
