from csaeo.utils.encoder import CSV_SCHEMA_VERSION, ReportEncoder, format_csv_value
from csaeo.utils.logger import logger
from csaeo.utils.rng import derive_rng

__all__ = ['CSV_SCHEMA_VERSION', 'ReportEncoder', 'format_csv_value', 'logger', 'derive_rng']
