"""dB / linear conversions shared by config loading and the metrics."""


def db_to_linear(value_db: float) -> float:
    return float(10.0 ** (value_db / 10.0))


def dbm_to_watts(value_dbm: float) -> float:
    return float(10.0 ** ((value_dbm - 30.0) / 10.0))
