"""
Caching Module
Caches CLI job results keyed by the canonical job description.
"""

import os
import json
import hashlib
import logging
from typing import Optional, Dict, Any
from datetime import datetime, timedelta

import redis

from config import get_settings

logger = logging.getLogger(__name__)

CACHE_TTL = 7 * 24 * 60 * 60  # 7 days


class ResultCache:
    """Stores JSON results on disk, with redis in front when it answers."""

    def __init__(self, cache_dir: Optional[str] = None, redis_url: Optional[str] = None):
        settings = get_settings()
        self.cache_dir = cache_dir or settings.cache_dir
        os.makedirs(self.cache_dir, exist_ok=True)

        self.redis_client = None
        redis_url = redis_url or settings.redis_url
        if redis_url:
            try:
                self.redis_client = redis.from_url(redis_url, decode_responses=True)
                self.redis_client.ping()
            except redis.RedisError as e:
                logger.info(f"Redis unavailable ({e}); using the file cache only")
                self.redis_client = None

    @staticmethod
    def job_key(job: Dict[str, Any]) -> str:
        """md5 of the canonical job JSON."""
        canonical = json.dumps(job, sort_keys=True, separators=(',', ':'))
        return f"hb:{hashlib.md5(canonical.encode()).hexdigest()}"

    def _path(self, key: str) -> str:
        return os.path.join(self.cache_dir, f"{key.replace(':', '_')}.json")

    def get(self, job: Dict[str, Any]) -> Optional[Dict]:
        """
        Cached result for a job.

        Args:
            job: Canonical job dictionary

        Returns:
            Result dictionary or None
        """
        key = self.job_key(job)
        if self.redis_client:
            try:
                cached = self.redis_client.get(key)
                if cached:
                    return json.loads(cached)
            except redis.RedisError:
                pass

        path = self._path(key)
        if os.path.exists(path):
            if os.path.getmtime(path) > (datetime.now() - timedelta(seconds=CACHE_TTL)).timestamp():
                with open(path, 'r') as f:
                    return json.load(f)
        return None

    def set(self, job: Dict[str, Any], result: Dict):
        """Store a result for a job."""
        key = self.job_key(job)
        payload = json.dumps(result, sort_keys=True)
        if self.redis_client:
            try:
                self.redis_client.setex(key, CACHE_TTL, payload)
            except redis.RedisError:
                pass

        with open(self._path(key), 'w') as f:
            f.write(payload)

    def clear(self, pattern: Optional[str] = None):
        """
        Clear cache.

        Args:
            pattern: Optional substring of the keys to remove
        """
        for filename in os.listdir(self.cache_dir):
            if pattern is None or pattern in filename:
                os.remove(os.path.join(self.cache_dir, filename))

        if self.redis_client:
            try:
                keys = self.redis_client.keys(f"*{pattern}*" if pattern else "hb:*")
                if keys:
                    self.redis_client.delete(*keys)
            except redis.RedisError:
                pass

    def stats(self) -> Dict:
        stats = {
            'file_count': 0,
            'total_size_mb': 0.0,
            'redis_enabled': self.redis_client is not None
        }
        for filename in os.listdir(self.cache_dir):
            stats['file_count'] += 1
            stats['total_size_mb'] += os.path.getsize(os.path.join(self.cache_dir, filename)) / (1024 * 1024)
        if self.redis_client:
            try:
                stats['redis_keys'] = self.redis_client.dbsize()
            except redis.RedisError:
                pass
        return stats
