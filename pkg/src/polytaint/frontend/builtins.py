"""Library classes modeled as bodiless MiniJ declarations in ``lib.*`` packages."""
from __future__ import annotations

from functools import lru_cache

from . import ast as A
from .parser import parse

LANG = """
package lib.lang;

class Object {
  String toString();
  boolean equals(Object o);
  int hashCode();
}
class String {
  String substring(int begin, int end);
  String substring(int begin);
  int lastIndexOf(String s);
  int indexOf(String s);
  String concat(String s);
  String trim();
  String toLowerCase();
  String toUpperCase();
  String replace(String a, String b);
  int length();
  boolean isEmpty();
  boolean startsWith(String s);
  boolean endsWith(String s);
  boolean contains(String s);
  static String valueOf(Object o);
  static String join(String sep, Collection<String> parts);
  String[] split(String regex);
}
class Integer {
  static Integer valueOf(int i);
  static int parseInt(String s);
  int intValue();
}
class StringBuilder {
  StringBuilder append(Object o);
  String toString();
}
class System {
  static String getenv(String name);
  static String getProperty(String name);
  static String lineSeparator();
}
class Class<T> {
  String getName();
}
class Runnable {
  void run();
}
"""

UTIL = """
package lib.util;

class Iterator<E> {
  boolean hasNext();
  E next();
}
class Collection<E> {
  Iterator<E> iterator();
  boolean add(E e);
  boolean addAll(Collection<E> c);
  boolean contains(Object o);
  int size();
  boolean isEmpty();
  E[] toArray();
  E[] toArray(E[] a);
}
class List<E> extends Collection<E> {
  E get(int index);
  E set(int index, E e);
  E remove(int index);
  List<E> subList(int from, int to);
}
class ArrayList<E> extends List<E> {
}
class LinkedList<E> extends List<E> {
  E getFirst();
  E getLast();
}
class Set<E> extends Collection<E> {
}
class HashSet<E> extends Set<E> {
}
class Map<K, V> {
  V get(Object key);
  V put(K key, V value);
  V remove(Object key);
  V getOrDefault(Object key, V dflt);
  boolean containsKey(Object key);
  Collection<V> values();
  Set<K> keySet();
  int size();
}
class HashMap<K, V> extends Map<K, V> {
}
class Properties {
  String getProperty(String key);
  String getProperty(String key, String dflt);
  Object setProperty(String key, String value);
}
class Optional<T> {
  static <T> Optional<T> of(T value);
  T get();
  T orElse(T other);
  boolean isPresent();
}
class Collections {
  static <T> List<T> singletonList(T o);
  static <T> List<T> unmodifiableList(List<T> l);
}
class Arrays {
  static <T> List<T> asList(T[] a);
}
"""

NIO = """
package lib.nio;

class Paths {
  static Path get(String first);
  static Path get(String first, String more);
}
class Path {
  Path toAbsolutePath();
  Path resolve(String other);
  Path getParent();
  Path normalize();
  File toFile();
  String toString();
}
class File {
  String getPath();
  String getName();
  String getAbsolutePath();
  File getParentFile();
  boolean exists();
}
"""

IO = """
package lib.io;

class BufferedReader {
  String readLine();
}
class PrintStream {
  void println(Object o);
}
"""

SOURCES = {"<lib/lang>": LANG, "<lib/util>": UTIL, "<lib/nio>": NIO, "<lib/io>": IO}


@lru_cache(maxsize=1)
def load_builtins() -> tuple[A.SourceUnit, ...]:
    """Parsed library units; every class lives in an unannotated ``lib.*`` package."""
    return tuple(parse(text, path) for path, text in SOURCES.items())
