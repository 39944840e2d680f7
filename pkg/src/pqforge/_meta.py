"""Parquet footer and page-header structures (parquet.thrift subset)."""

from __future__ import annotations

from ._thrift import read_struct, register, write_struct

MAGIC = b"PAR1"

# Type
BOOLEAN, INT32, INT64, INT96, FLOAT, DOUBLE, BYTE_ARRAY, FIXED_LEN_BYTE_ARRAY = range(8)

# FieldRepetitionType
REQUIRED, OPTIONAL, REPEATED = range(3)

# Encoding ids
ENC_PLAIN = 0
ENC_PLAIN_DICTIONARY = 2
ENC_RLE = 3
ENC_BIT_PACKED = 4
ENC_DELTA_BINARY_PACKED = 5
ENC_DELTA_LENGTH_BYTE_ARRAY = 6
ENC_DELTA_BYTE_ARRAY = 7
ENC_RLE_DICTIONARY = 8
ENC_BYTE_STREAM_SPLIT = 9

# CompressionCodec ids
CODEC_UNCOMPRESSED = 0
CODEC_SNAPPY = 1
CODEC_GZIP = 2
CODEC_LZO = 3
CODEC_BROTLI = 4
CODEC_LZ4 = 5
CODEC_ZSTD = 6
CODEC_LZ4_RAW = 7

CODEC_NAMES = {
    0: "UNCOMPRESSED", 1: "SNAPPY", 2: "GZIP", 3: "LZO",
    4: "BROTLI", 5: "LZ4", 6: "ZSTD", 7: "LZ4_RAW",
}

# PageType
DATA_PAGE, INDEX_PAGE, DICTIONARY_PAGE, DATA_PAGE_V2 = range(4)

# ConvertedType values that change sort order
CONVERTED_UINT = {11, 12, 13, 14}  # UINT_8 .. UINT_64
CONVERTED_DECIMAL = 5
CONVERTED_INTERVAL = 21

_EMPTY: dict = {}

register("Empty", _EMPTY)
register("DecimalType", {1: ("scale", "i32"), 2: ("precision", "i32")})
register("TimeUnit", {1: ("millis", "Empty"), 2: ("micros", "Empty"), 3: ("nanos", "Empty")})
register("TimeType", {1: ("is_adjusted_to_utc", "bool"), 2: ("unit", "TimeUnit")})
register("IntType", {1: ("bit_width", "i8"), 2: ("is_signed", "bool")})
register("LogicalType", {
    1: ("string", "Empty"),
    2: ("map", "Empty"),
    3: ("list", "Empty"),
    4: ("enum", "Empty"),
    5: ("decimal", "DecimalType"),
    6: ("date", "Empty"),
    7: ("time", "TimeType"),
    8: ("timestamp", "TimeType"),
    10: ("integer", "IntType"),
    11: ("unknown", "Empty"),
    12: ("json", "Empty"),
    13: ("bson", "Empty"),
    14: ("uuid", "Empty"),
    15: ("float16", "Empty"),
})
register("SchemaElement", {
    1: ("type", "i32"),
    2: ("type_length", "i32"),
    3: ("repetition_type", "i32"),
    4: ("name", "string"),
    5: ("num_children", "i32"),
    6: ("converted_type", "i32"),
    7: ("scale", "i32"),
    8: ("precision", "i32"),
    9: ("field_id", "i32"),
    10: ("logical_type", "LogicalType"),
})
register("Statistics", {
    1: ("max", "binary"),
    2: ("min", "binary"),
    3: ("null_count", "i64"),
    4: ("distinct_count", "i64"),
    5: ("max_value", "binary"),
    6: ("min_value", "binary"),
    7: ("is_max_value_exact", "bool"),
    8: ("is_min_value_exact", "bool"),
})
register("KeyValue", {1: ("key", "string"), 2: ("value", "string")})
register("PageEncodingStats", {1: ("page_type", "i32"), 2: ("encoding", "i32"), 3: ("count", "i32")})
register("ColumnMetaData", {
    1: ("type", "i32"),
    2: ("encodings", ("list", "i32")),
    3: ("path_in_schema", ("list", "string")),
    4: ("codec", "i32"),
    5: ("num_values", "i64"),
    6: ("total_uncompressed_size", "i64"),
    7: ("total_compressed_size", "i64"),
    8: ("key_value_metadata", ("list", "KeyValue")),
    9: ("data_page_offset", "i64"),
    10: ("index_page_offset", "i64"),
    11: ("dictionary_page_offset", "i64"),
    12: ("statistics", "Statistics"),
    13: ("encoding_stats", ("list", "PageEncodingStats")),
    14: ("bloom_filter_offset", "i64"),
    15: ("bloom_filter_length", "i32"),
})
register("ColumnChunk", {
    1: ("file_path", "string"),
    2: ("file_offset", "i64"),
    3: ("meta_data", "ColumnMetaData"),
    4: ("offset_index_offset", "i64"),
    5: ("offset_index_length", "i32"),
    6: ("column_index_offset", "i64"),
    7: ("column_index_length", "i32"),
    8: ("crypto_metadata", "binary"),
    9: ("encrypted_column_metadata", "binary"),
})
register("SortingColumn", {1: ("column_idx", "i32"), 2: ("descending", "bool"), 3: ("nulls_first", "bool")})
register("RowGroup", {
    1: ("columns", ("list", "ColumnChunk")),
    2: ("total_byte_size", "i64"),
    3: ("num_rows", "i64"),
    4: ("sorting_columns", ("list", "SortingColumn")),
    5: ("file_offset", "i64"),
    6: ("total_compressed_size", "i64"),
    7: ("ordinal", "i16"),
})
register("ColumnOrder", {1: ("type_order", "Empty")})
register("FileMetaData", {
    1: ("version", "i32"),
    2: ("schema", ("list", "SchemaElement")),
    3: ("num_rows", "i64"),
    4: ("row_groups", ("list", "RowGroup")),
    5: ("key_value_metadata", ("list", "KeyValue")),
    6: ("created_by", "string"),
    7: ("column_orders", ("list", "ColumnOrder")),
    8: ("encryption_algorithm", "binary"),
    9: ("footer_signing_key_metadata", "binary"),
})
register("DataPageHeader", {
    1: ("num_values", "i32"),
    2: ("encoding", "i32"),
    3: ("definition_level_encoding", "i32"),
    4: ("repetition_level_encoding", "i32"),
    5: ("statistics", "Statistics"),
})
register("DictionaryPageHeader", {1: ("num_values", "i32"), 2: ("encoding", "i32"), 3: ("is_sorted", "bool")})
register("DataPageHeaderV2", {
    1: ("num_values", "i32"),
    2: ("num_nulls", "i32"),
    3: ("num_rows", "i32"),
    4: ("encoding", "i32"),
    5: ("definition_levels_byte_length", "i32"),
    6: ("repetition_levels_byte_length", "i32"),
    7: ("is_compressed", "bool"),
    8: ("statistics", "Statistics"),
})
register("PageHeader", {
    1: ("type", "i32"),
    2: ("uncompressed_page_size", "i32"),
    3: ("compressed_page_size", "i32"),
    4: ("crc", "i32"),
    5: ("data_page_header", "DataPageHeader"),
    6: ("index_page_header", "Empty"),
    7: ("dictionary_page_header", "DictionaryPageHeader"),
    8: ("data_page_header_v2", "DataPageHeaderV2"),
})


def read_file_metadata(buf) -> dict:
    meta, _ = read_struct("FileMetaData", buf, 0)
    return meta


def write_file_metadata(meta: dict) -> bytes:
    return write_struct("FileMetaData", meta)


def read_page_header(buf, pos: int = 0) -> tuple[dict, int]:
    return read_struct("PageHeader", buf, pos)


def write_page_header(header: dict) -> bytes:
    return write_struct("PageHeader", header)
