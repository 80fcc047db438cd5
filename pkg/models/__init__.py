from models.weight_cache import WeightCacheEntry
