"""dB/dBm conversions. All internal computation is in linear units (watts);
these helpers are used only at config and output boundaries."""

import numpy as np


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(x_w):
    return 10.0 * np.log10(x_w) + 30.0
